//! Named finite-difference gradient checks over every trainable component.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use crate::data::{Assessment, SubjectRecord, IMAGING, LAB};
use crate::encoder::EncoderKind;
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionModel, PredictionTask};
use crate::lstm::{LstmParams, LstmVariant};
use crate::numerics::{dot, grad_check, rel_err, Activation, Matrix, ParamSet, Rng};
use crate::simta::{AsyncSeries, SimTAModuleParams, SimTAStack};

/// Central-difference step.
pub const GRAD_H: f64 = 1e-5;
/// Largest accepted relative error.
pub const GRAD_TOL: f64 = 1e-5;
/// Size of the perturbation added to analytic gradients by `inject_fault`.
pub const FAULT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckModule {
    All,
    Simta,
    Lstm,
    Fusion,
}

impl CheckModule {
    fn includes(self, other: CheckModule) -> bool {
        self == CheckModule::All || self == other
    }
}

impl FromStr for CheckModule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CheckModule::All),
            "simta" => Ok(CheckModule::Simta),
            "lstm" => Ok(CheckModule::Lstm),
            "fusion" => Ok(CheckModule::Fusion),
            other => Err(Error::Config(format!("unknown gradcheck module {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupError {
    pub group: String,
    pub n_params: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub module: CheckModule,
    pub n_params: usize,
    pub max_rel_err: f64,
    pub tol: f64,
    pub passed: bool,
    pub groups: Vec<GroupError>,
}

impl CheckResult {
    /// The group holding the worst entry.
    pub fn worst_group(&self) -> Option<&GroupError> {
        self.groups
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

fn random_matrix(rng: &mut Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.normal()).collect()).expect("shape matches")
}

fn random_series(rng: &mut Rng, len: usize, channels: usize) -> AsyncSeries {
    let mut t = rng.uniform(0.0, 1.0);
    let mut stamps = Vec::with_capacity(len);
    for _ in 0..len {
        stamps.push(t);
        t += rng.uniform(0.2, 1.5);
    }
    AsyncSeries::new(random_matrix(rng, len, channels), stamps).expect("increasing timestamps")
}

/// Checks `loss` (which accumulates its gradient into the second argument)
/// at `model`, reporting the worst relative error per parameter group.
fn check<M, F>(
    name: &str,
    module: CheckModule,
    model: &M,
    loss: F,
    inject_fault: bool,
) -> Result<CheckResult>
where
    M: ParamSet + Clone,
    F: Fn(&M, &mut M) -> Result<f64>,
{
    // surface errors once before the closure swallows them as NaN
    loss(model, &mut model.zeros_like())?;
    let report = grad_check(
        |flat| {
            let mut m = model.clone();
            m.load_flat(flat);
            let mut g = m.zeros_like();
            let l = loss(&m, &mut g).unwrap_or(f64::NAN);
            let mut g = g.to_flat();
            if inject_fault {
                g.iter_mut().for_each(|v| *v = *v * (1.0 + FAULT) + FAULT);
            }
            (l, g)
        },
        &model.to_flat(),
        GRAD_H,
        GRAD_TOL,
    );
    let mut groups = Vec::new();
    let mut offset = 0;
    for (group, n) in model.group_names() {
        let worst = (offset..offset + n)
            .map(|i| rel_err(report.analytic[i], report.numeric[i]))
            .map(|e| if e.is_nan() { f64::INFINITY } else { e })
            .fold(0.0, f64::max);
        groups.push(GroupError {
            group,
            n_params: n,
            max_rel_err: worst,
        });
        offset += n;
    }
    Ok(CheckResult {
        name: name.to_string(),
        module,
        n_params: report.n_params,
        max_rel_err: report.max_rel_err,
        tol: report.tol,
        passed: report.passed,
        groups,
    })
}

fn simta_module(inject: bool) -> Result<CheckResult> {
    let mut rng = Rng::new(101);
    let params = SimTAModuleParams::new(&mut rng, 4, 3);
    let x = random_matrix(&mut rng, 6, 4);
    let tau: Vec<f64> = (0..5).map(|_| rng.uniform(0.2, 1.5)).collect();
    let w = random_matrix(&mut rng, 6, 3);
    check(
        "simta_module",
        CheckModule::Simta,
        &params,
        |p, g| {
            let gap = crate::simta::elapsed_matrix(&tau)?;
            let (y, cache) = p.forward_with_gap(&x, &gap, Activation::Tanh)?;
            p.backward(&cache, &w, g)?;
            Ok(dot(y.data(), w.data()))
        },
        inject,
    )
}

fn simta_stack(inject: bool) -> Result<CheckResult> {
    let mut rng = Rng::new(102);
    let stack = SimTAStack::new(&mut rng, 2, &[4, 3], Activation::Tanh)?;
    let series = random_series(&mut rng, 7, 2);
    let w: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
    check(
        "simta_stack",
        CheckModule::Simta,
        &stack,
        |s, g| {
            let (y, cache) = s.forward(&series)?;
            s.backward(&cache, &w, g)?;
            Ok(dot(&y, &w))
        },
        inject,
    )
}

fn lstm(variant: LstmVariant, inject: bool) -> Result<CheckResult> {
    let mut rng = Rng::new(103);
    let params = LstmParams::new(&mut rng, 2, 4, variant);
    let series = random_series(&mut rng, 6, 2);
    let w: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
    let name = match variant {
        LstmVariant::Plain => "lstm",
        LstmVariant::Interval => "lstm_i",
        LstmVariant::Stamp => "lstm_s",
    };
    check(
        name,
        CheckModule::Lstm,
        &params,
        |p, g| {
            let (h, cache) = p.forward(&series)?;
            p.backward(&cache, &w, g)?;
            Ok(dot(&h, &w))
        },
        inject,
    )
}

/// A two-modality subject with interventions, imaging and lab series.
pub fn toy_fusion_subject(rng: &mut Rng) -> SubjectRecord {
    let mut modalities = BTreeMap::new();
    modalities.insert(
        LAB.to_string(),
        AsyncSeries::new(random_matrix(rng, 4, 3), vec![0.0, 20.0, 45.0, 70.0])
            .expect("valid series"),
    );
    modalities.insert(
        IMAGING.to_string(),
        AsyncSeries::new(random_matrix(rng, 3, 2), vec![5.0, 50.0, 110.0]).expect("valid series"),
    );
    SubjectRecord {
        id: "toy".into(),
        static_features: vec![0.3, -1.2],
        modalities,
        interventions: vec![10.0, 40.0],
        assessments: vec![Assessment { t: 200.0, label: 1 }],
        pfs: None,
        os: None,
    }
}

fn fusion(kind: EncoderKind, inject: bool) -> Result<CheckResult> {
    let mut rng = Rng::new(104);
    let subject = toy_fusion_subject(&mut rng);
    let dims = [(LAB.to_string(), 3), (IMAGING.to_string(), 2)]
        .into_iter()
        .collect();
    let cfg = FusionConfig {
        encoder: kind,
        summary_dim: 4,
        static_hidden: 3,
        head_hidden: 5,
        ..FusionConfig::default()
    };
    let model = FusionModel::new(&mut rng, cfg, &dims, 2)?;
    let task = PredictionTask::new(0, &subject.assessments[0], model.config.horizon_days);
    let input = model.prepare(&subject, &task)?;
    let name = match kind {
        EncoderKind::Simta => "fusion_simta".to_string(),
        EncoderKind::Lstm(_) => "fusion_lstm_s".to_string(),
    };
    check(
        &name,
        CheckModule::Fusion,
        &model,
        |m, g| m.loss_and_grad(&input, 1, g),
        inject,
    )
}

/// Runs every check selected by `filter`. With `inject_fault` the analytic
/// gradients are deliberately perturbed, so every check should fail.
pub fn run_checks(filter: CheckModule, inject_fault: bool) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    if filter.includes(CheckModule::Simta) {
        out.push(simta_module(inject_fault)?);
        out.push(simta_stack(inject_fault)?);
    }
    if filter.includes(CheckModule::Lstm) {
        for v in [
            LstmVariant::Plain,
            LstmVariant::Interval,
            LstmVariant::Stamp,
        ] {
            out.push(lstm(v, inject_fault)?);
        }
    }
    if filter.includes(CheckModule::Fusion) {
        out.push(fusion(EncoderKind::Simta, inject_fault)?);
        out.push(fusion(EncoderKind::Lstm(LstmVariant::Stamp), inject_fault)?);
    }
    Ok(out)
}
