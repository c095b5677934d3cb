//! Multi-modal fusion model: one series encoder per serial modality, a
//! temporal encoding of each modality's gap to the assessment, a static
//! encoder and a two-class head.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Assessment, Cohort, SubjectRecord, IMAGING, INTERVENTION, LAB};
use crate::encoder::{build_encoder, simta_param_count, EncoderCache, EncoderKind, SeriesEncoder};
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpCache};
use crate::numerics::{cross_entropy_loss, softmax2, Activation, Matrix, ParamSet, Rng};
use crate::simta::{AsyncSeries, TemporalEncoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Radiomics,
    Lab,
    Interventions,
}

impl Ablation {
    pub fn modality(self) -> &'static str {
        match self {
            Ablation::Radiomics => IMAGING,
            Ablation::Lab => LAB,
            Ablation::Interventions => INTERVENTION,
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radiomics" | "imaging" => Ok(Ablation::Radiomics),
            "lab" => Ok(Ablation::Lab),
            "interventions" | "intervention" => Ok(Ablation::Interventions),
            other => Err(Error::Config(format!("unknown ablation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub encoder: EncoderKind,
    pub summary_dim: usize,
    pub simta_depth: usize,
    pub static_hidden: usize,
    pub head_hidden: usize,
    pub activation: Activation,
    /// Observations later than `assessment - horizon_days` are invisible.
    pub horizon_days: f64,
    /// Timestamps and gaps are divided by this before entering the model.
    pub time_unit_days: f64,
    pub encoding_base: f64,
    /// Interventions get their own encoder when set.
    pub interventions: bool,
    pub ablate: Vec<Ablation>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Simta,
            summary_dim: 32,
            simta_depth: 1,
            static_hidden: 16,
            head_hidden: 32,
            activation: Activation::Tanh,
            horizon_days: 90.0,
            time_unit_days: 30.0,
            encoding_base: 10_000.0,
            interventions: true,
            ablate: Vec::new(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.summary_dim == 0 || self.summary_dim % 2 != 0 {
            return Err(Error::Config(
                "summary_dim must be even and positive".into(),
            ));
        }
        if self.simta_depth == 0 || self.static_hidden == 0 || self.head_hidden == 0 {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if !(self.horizon_days >= 0.0 && self.horizon_days.is_finite()) {
            return Err(Error::Config("horizon_days must be finite and >= 0".into()));
        }
        if !(self.time_unit_days > 0.0 && self.time_unit_days.is_finite()) {
            return Err(Error::Config("time_unit_days must be positive".into()));
        }
        Ok(())
    }

    fn uses(&self, modality: &str) -> bool {
        !self.ablate.iter().any(|a| a.modality() == modality)
    }
}

/// Per-feature standardization with statistics from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Population mean and standard deviation per column. Constant columns
    /// keep a scale of one.
    pub fn fit<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::dim("standardizer fit", (1, dim), (1, row.len())));
            }
            n += 1;
            for k in 0..dim {
                let d = row[k] - mean[k];
                mean[k] += d / n as f64;
                m2[k] += d * (row[k] - mean[k]);
            }
        }
        if n == 0 {
            return Err(Error::Data("no rows to fit normalization".into()));
        }
        let scale = m2
            .iter()
            .map(|&s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// One assessment to predict, with its visibility cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionTask {
    pub subject: usize,
    pub assessment_t: f64,
    pub cutoff: f64,
    pub label: u8,
}

impl PredictionTask {
    pub fn new(subject: usize, assessment: &Assessment, horizon_days: f64) -> Self {
        Self {
            subject,
            assessment_t: assessment.t,
            cutoff: assessment.t - horizon_days,
            label: assessment.label,
        }
    }
}

/// Every assessment of the listed subjects, in subject then time order.
pub fn tasks_for(cohort: &Cohort, subjects: &[usize], horizon_days: f64) -> Vec<PredictionTask> {
    subjects
        .iter()
        .flat_map(|&i| {
            cohort.subjects[i]
                .assessments
                .iter()
                .map(move |a| PredictionTask::new(i, a, horizon_days))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub name: String,
    pub encoder: SeriesEncoder,
    pub placeholder: Vec<f64>,
    pub norm: Standardizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub config: FusionConfig,
    pub branches: Vec<Branch>,
    pub static_norm: Standardizer,
    /// Width of the single-study imaging slot in the static input (0 when
    /// imaging is not used).
    pub single_ct_dim: usize,
    pub static_encoder: Mlp,
    pub head: Mlp,
}

/// Model-ready inputs for one task: standardized, time-scaled visible
/// series with their gap encodings, and the static vector.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    pub branches: Vec<Option<(AsyncSeries, Vec<f64>)>>,
    pub static_x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FusionCache {
    branches: Vec<Option<EncoderCache>>,
    static_cache: MlpCache,
    head_cache: MlpCache,
}

impl FusionModel {
    /// `modality_dims` lists the serial modalities present in the data;
    /// interventions are added when enabled.
    pub fn new(
        rng: &mut Rng,
        config: FusionConfig,
        modality_dims: &BTreeMap<String, usize>,
        static_dim: usize,
    ) -> Result<Self> {
        config.validate()?;
        let mut inputs: Vec<(String, usize)> = modality_dims
            .iter()
            .filter(|(name, _)| name.as_str() != INTERVENTION)
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        if config.interventions {
            inputs.push((INTERVENTION.to_string(), 1));
        }
        let dims = vec![config.summary_dim; config.simta_depth];
        let mut branches = Vec::new();
        for (name, dim) in inputs.into_iter().filter(|(n, _)| config.uses(n)) {
            let budget = simta_param_count(dim, &dims);
            let encoder = build_encoder(
                rng,
                config.encoder,
                dim,
                &dims,
                config.activation,
                Some(budget),
            )?;
            branches.push(Branch {
                name,
                encoder,
                placeholder: vec![0.0; config.summary_dim],
                norm: Standardizer::identity(dim),
            });
        }
        if branches.is_empty() {
            return Err(Error::Config(
                "fusion model needs at least one serial modality".into(),
            ));
        }
        let single_ct_dim = if config.uses(IMAGING) {
            modality_dims.get(IMAGING).copied().unwrap_or(0)
        } else {
            0
        };
        let static_in = static_dim
            + if single_ct_dim > 0 {
                single_ct_dim + 1
            } else {
                0
            };
        let static_encoder = Mlp::new(
            rng,
            static_in,
            config.static_hidden,
            config.static_hidden,
            config.activation,
            config.activation,
        );
        let head_in = branches.len() * config.summary_dim + config.static_hidden;
        let head = Mlp::new(
            rng,
            head_in,
            config.head_hidden,
            2,
            config.activation,
            Activation::Identity,
        );
        Ok(Self {
            config,
            branches,
            static_norm: Standardizer::identity(static_dim),
            single_ct_dim,
            static_encoder,
            head,
        })
    }

    pub fn for_cohort(rng: &mut Rng, config: FusionConfig, cohort: &Cohort) -> Result<Self> {
        Self::new(rng, config, &cohort.modality_dims(), cohort.static_dim())
    }

    pub fn head_input_dim(&self) -> usize {
        self.head.input_dim()
    }

    fn encoding(&self) -> Result<TemporalEncoding> {
        TemporalEncoding::with_base(self.config.summary_dim, self.config.encoding_base)
    }

    /// Fits every standardizer on the listed (training) subjects only.
    /// Interventions are binary flags and stay unscaled.
    pub fn fit_normalization(&mut self, cohort: &Cohort, train: &[usize]) -> Result<()> {
        let static_rows: Vec<&[f64]> = train
            .iter()
            .map(|&i| cohort.subjects[i].static_features.as_slice())
            .collect();
        self.static_norm = Standardizer::fit(self.static_norm.dim(), static_rows)?;
        for b in &mut self.branches {
            if b.name == INTERVENTION {
                continue;
            }
            let rows = train
                .iter()
                .filter_map(|&i| cohort.subjects[i].modalities.get(&b.name))
                .flat_map(|s| s.values().iter_rows());
            b.norm = Standardizer::fit(b.norm.dim(), rows).map_err(|_| {
                Error::Data(format!("no training observations for modality {}", b.name))
            })?;
        }
        Ok(())
    }

    pub fn prepare(&self, subject: &SubjectRecord, task: &PredictionTask) -> Result<PreparedInput> {
        if subject.static_features.len() != self.static_norm.dim() {
            return Err(Error::dim(
                "static features",
                (1, self.static_norm.dim()),
                (1, subject.static_features.len()),
            ));
        }
        let unit = self.config.time_unit_days;
        let encoding = self.encoding()?;
        let mut static_x = self.static_norm.apply(&subject.static_features);
        let mut single_ct: Option<Vec<f64>> = None;
        let mut branches = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let visible = subject
                .serial(&b.name)
                .and_then(|s| s.truncate_at(task.cutoff));
            let Some(series) = visible else {
                branches.push(None);
                continue;
            };
            if series.channels() != b.norm.dim() {
                return Err(Error::dim(
                    "modality channels",
                    (1, b.norm.dim()),
                    (1, series.channels()),
                ));
            }
            if b.name == IMAGING && series.len() == 1 {
                single_ct = Some(b.norm.apply(series.values().row(0)));
                branches.push(None);
                continue;
            }
            let delta = (task.assessment_t - series.last_timestamp()) / unit;
            let values = series.map_values(|k, v| (v - b.norm.mean[k]) / b.norm.scale[k]);
            let scaled = AsyncSeries::new(
                values.values().clone(),
                series.timestamps().iter().map(|t| t / unit).collect(),
            )?;
            branches.push(Some((scaled, encoding.encode(delta)?)));
        }
        if self.single_ct_dim > 0 {
            match single_ct {
                Some(x) => {
                    static_x.extend(x);
                    static_x.push(1.0);
                }
                None => static_x.extend(std::iter::repeat_n(0.0, self.single_ct_dim + 1)),
            }
        }
        if branches.iter().all(Option::is_none) {
            return Err(Error::InsufficientData(format!(
                "subject {} has no serial data before {}",
                subject.id, task.cutoff
            )));
        }
        Ok(PreparedInput { branches, static_x })
    }

    pub fn forward_prepared(&self, input: &PreparedInput) -> Result<([f64; 2], FusionCache)> {
        let mut concat = Vec::with_capacity(self.head_input_dim());
        let mut caches = Vec::with_capacity(self.branches.len());
        for (b, inp) in self.branches.iter().zip(&input.branches) {
            match inp {
                Some((series, enc)) => {
                    let (summary, cache) = b.encoder.forward(series)?;
                    concat.extend(summary.iter().zip(enc).map(|(s, e)| s + e));
                    caches.push(Some(cache));
                }
                None => {
                    concat.extend_from_slice(&b.placeholder);
                    caches.push(None);
                }
            }
        }
        let (st, static_cache) = self
            .static_encoder
            .forward(&Matrix::row_vector(&input.static_x))?;
        concat.extend_from_slice(st.data());
        let (scores, head_cache) = self.head.forward(&Matrix::row_vector(&concat))?;
        Ok((
            [scores[(0, 0)], scores[(0, 1)]],
            FusionCache {
                branches: caches,
                static_cache,
                head_cache,
            },
        ))
    }

    pub fn forward(
        &self,
        subject: &SubjectRecord,
        task: &PredictionTask,
    ) -> Result<([f64; 2], FusionCache)> {
        self.forward_prepared(&self.prepare(subject, task)?)
    }

    /// Accumulates gradients of `d_scores . scores` into `grad`.
    pub fn backward(
        &self,
        cache: &FusionCache,
        d_scores: &[f64; 2],
        grad: &mut FusionModel,
    ) -> Result<()> {
        let d_concat = self
            .head
            .backward(
                &cache.head_cache,
                &Matrix::row_vector(d_scores),
                &mut grad.head,
            )?
            .into_data();
        let sd = self.config.summary_dim;
        for (k, (b, c)) in self.branches.iter().zip(&cache.branches).enumerate() {
            let seg = &d_concat[k * sd..(k + 1) * sd];
            let g = &mut grad.branches[k];
            match c {
                Some(c) => b.encoder.backward(c, seg, &mut g.encoder)?,
                None => g.placeholder.iter_mut().zip(seg).for_each(|(p, d)| *p += d),
            }
        }
        let rest = &d_concat[self.branches.len() * sd..];
        self.static_encoder.backward(
            &cache.static_cache,
            &Matrix::row_vector(rest),
            &mut grad.static_encoder,
        )?;
        Ok(())
    }

    /// Cross-entropy for one prepared task; gradients go into `grad`.
    pub fn loss_and_grad(
        &self,
        input: &PreparedInput,
        label: u8,
        grad: &mut FusionModel,
    ) -> Result<f64> {
        let (scores, cache) = self.forward_prepared(input)?;
        let (loss, d) = cross_entropy_loss(&Matrix::row_vector(&scores), &[label])?;
        self.backward(&cache, &[d[(0, 0)], d[(0, 1)]], grad)?;
        Ok(loss)
    }

    /// Probability of response (class 1).
    pub fn predict_proba(&self, subject: &SubjectRecord, task: &PredictionTask) -> Result<f64> {
        let (s, _) = self.forward(subject, task)?;
        Ok(proba_from_scores(s))
    }
}

pub fn proba_from_scores(scores: [f64; 2]) -> f64 {
    softmax2(scores[0], scores[1]).0[1]
}

impl ParamSet for FusionModel {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for b in &self.branches {
            b.encoder
                .visit(&mut |n, g| f(&format!("{}.{n}", b.name), g));
            f(&format!("{}.placeholder", b.name), &b.placeholder);
        }
        self.static_encoder
            .visit(&mut |n, g| f(&format!("static.{n}"), g));
        self.head.visit(&mut |n, g| f(&format!("head.{n}"), g));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for b in &mut self.branches {
            let name = b.name.clone();
            b.encoder
                .visit_mut(&mut |n, g| f(&format!("{name}.{n}"), g));
            f(&format!("{name}.placeholder"), &mut b.placeholder);
        }
        self.static_encoder
            .visit_mut(&mut |n, g| f(&format!("static.{n}"), g));
        self.head.visit_mut(&mut |n, g| f(&format!("head.{n}"), g));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CohortConfig, CohortGenerator};
    use crate::lstm::LstmVariant;
    use crate::numerics::grad_check;

    fn small_cohort(n: usize, seed: u64) -> Cohort {
        let cfg = CohortConfig {
            n_subjects: n,
            ..CohortConfig::default()
        };
        CohortGenerator::new(cfg, seed).unwrap().generate().unwrap()
    }

    fn toy_subject() -> (SubjectRecord, BTreeMap<String, usize>) {
        let mut rng = Rng::new(5);
        let mut modalities = BTreeMap::new();
        let lab = Matrix::from_vec(4, 3, (0..12).map(|_| rng.normal()).collect()).unwrap();
        modalities.insert(
            LAB.to_string(),
            AsyncSeries::new(lab, vec![0.0, 20.0, 45.0, 70.0]).unwrap(),
        );
        let img = Matrix::from_vec(3, 2, (0..6).map(|_| rng.normal()).collect()).unwrap();
        modalities.insert(
            IMAGING.to_string(),
            AsyncSeries::new(img, vec![5.0, 50.0, 110.0]).unwrap(),
        );
        let s = SubjectRecord {
            id: "toy".into(),
            static_features: vec![0.3, -1.2],
            modalities,
            interventions: vec![10.0, 40.0],
            assessments: vec![Assessment { t: 200.0, label: 1 }],
            pfs: None,
            os: None,
        };
        let dims = [(LAB.to_string(), 3), (IMAGING.to_string(), 2)]
            .into_iter()
            .collect();
        (s, dims)
    }

    fn toy_model(kind: EncoderKind) -> FusionModel {
        let (_, dims) = toy_subject();
        let cfg = FusionConfig {
            encoder: kind,
            summary_dim: 4,
            static_hidden: 3,
            head_hidden: 5,
            ..FusionConfig::default()
        };
        FusionModel::new(&mut Rng::new(9), cfg, &dims, 2).unwrap()
    }

    fn task(s: &SubjectRecord) -> PredictionTask {
        PredictionTask::new(0, &s.assessments[0], 90.0)
    }

    #[test]
    fn head_input_dim_matches_parts() {
        let m = toy_model(EncoderKind::Simta);
        assert_eq!(m.branches.len(), 3);
        assert_eq!(m.head_input_dim(), 3 * 4 + 3);
        assert_eq!(m.static_encoder.input_dim(), 2 + 2 + 1);
        for b in &m.branches {
            assert_eq!(b.placeholder.len(), b.encoder.output_dim());
        }
    }

    #[test]
    fn modalities_get_their_own_gap() {
        let (s, _) = toy_subject();
        let m = toy_model(EncoderKind::Simta);
        let input = m.prepare(&s, &task(&s)).unwrap();
        let enc = TemporalEncoding::new(4).unwrap();
        let by_name: BTreeMap<&str, &Vec<f64>> = m
            .branches
            .iter()
            .zip(&input.branches)
            .map(|(b, i)| (b.name.as_str(), &i.as_ref().unwrap().1))
            .collect();
        // cutoff 110: lab last seen at 70, imaging at 110, interventions at 40
        assert_eq!(by_name[LAB], &enc.encode(130.0 / 30.0).unwrap());
        assert_eq!(by_name[IMAGING], &enc.encode(90.0 / 30.0).unwrap());
        assert_eq!(by_name[INTERVENTION], &enc.encode(160.0 / 30.0).unwrap());
        assert_ne!(by_name[LAB], by_name[IMAGING]);
    }

    #[test]
    fn single_visible_ct_goes_through_static_path() {
        let (mut s, _) = toy_subject();
        let m = toy_model(EncoderKind::Simta);
        s.assessments[0].t = 120.0;
        // cutoff 30: only the imaging study at t=5 is visible
        let input = m.prepare(&s, &task(&s)).unwrap();
        let img = m.branches.iter().position(|b| b.name == IMAGING).unwrap();
        assert!(input.branches[img].is_none());
        let x = s.modalities[IMAGING].values().row(0).to_vec();
        assert_eq!(&input.static_x[2..], &[x[0], x[1], 1.0][..]);

        s.assessments[0].t = 250.0;
        let input = m.prepare(&s, &task(&s)).unwrap();
        assert!(input.branches[img].is_some());
        assert_eq!(&input.static_x[2..], &[0.0, 0.0, 0.0][..]);
    }

    #[test]
    fn later_observations_never_change_scores() {
        let (s, _) = toy_subject();
        let m = toy_model(EncoderKind::Simta);
        let t = task(&s);
        let base = m.forward(&s, &t).unwrap().0;
        let mut bigger = s.clone();
        let lab = &s.modalities[LAB];
        let mut rows: Vec<Vec<f64>> = lab.values().iter_rows().map(<[f64]>::to_vec).collect();
        rows.push(vec![100.0, -100.0, 5.0]);
        let mut ts = lab.timestamps().to_vec();
        ts.push(t.cutoff + 1e-9);
        bigger.modalities.insert(
            LAB.into(),
            AsyncSeries::new(Matrix::from_rows(&rows).unwrap(), ts).unwrap(),
        );
        bigger.interventions.push(t.cutoff + 0.5);
        assert_eq!(m.forward(&bigger, &t).unwrap().0, base);
    }

    #[test]
    fn no_visible_series_is_insufficient() {
        let (s, _) = toy_subject();
        let m = toy_model(EncoderKind::Simta);
        let early = PredictionTask {
            subject: 0,
            assessment_t: 50.0,
            cutoff: -40.0,
            label: 0,
        };
        assert!(matches!(
            m.prepare(&s, &early),
            Err(Error::InsufficientData(_))
        ));
    }

    fn check_grads(m: &FusionModel, input: &PreparedInput) {
        let report = grad_check(
            |flat| {
                let mut mm = m.clone();
                mm.load_flat(flat);
                let mut g = mm.zeros_like();
                let loss = mm.loss_and_grad(input, 1, &mut g).unwrap();
                (loss, g.to_flat())
            },
            &m.to_flat(),
            1e-5,
            1e-5,
        );
        assert!(
            report.passed,
            "max rel err {} at {:?}",
            report.max_rel_err, report.worst_index
        );
    }

    #[test]
    fn end_to_end_gradients() {
        let (s, _) = toy_subject();
        for kind in [EncoderKind::Simta, EncoderKind::Lstm(LstmVariant::Stamp)] {
            let m = toy_model(kind);
            check_grads(&m, &m.prepare(&s, &task(&s)).unwrap());
        }
    }

    #[test]
    fn absent_modality_trains_only_its_placeholder() {
        let (mut s, _) = toy_subject();
        s.modalities.remove(IMAGING);
        let m = toy_model(EncoderKind::Simta);
        let input = m.prepare(&s, &task(&s)).unwrap();
        check_grads(&m, &input);
        let mut g = m.zeros_like();
        m.loss_and_grad(&input, 0, &mut g).unwrap();
        let img = m.branches.iter().position(|b| b.name == IMAGING).unwrap();
        assert!(g.branches[img].placeholder.iter().any(|&v| v != 0.0));
        assert!(g.branches[img].encoder.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (s, _) = toy_subject();
        let m = toy_model(EncoderKind::Simta);
        let (_, cache) = m.forward(&s, &task(&s)).unwrap();
        let mut g = m.zeros_like();
        m.backward(&cache, &[0.0, 0.0], &mut g).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn probabilities() {
        assert_eq!(proba_from_scores([0.0, 0.0]), 0.5);
        let mut rng = Rng::new(1);
        for _ in 0..100 {
            let s = [rng.normal() * 5.0, rng.normal() * 5.0];
            let p = proba_from_scores(s);
            let q = softmax2(s[0], s[1]).0[0];
            assert!((p + q - 1.0).abs() <= 1e-12);
            assert_eq!(p >= 0.5, s[1] >= s[0]);
        }
    }

    #[test]
    fn deterministic_prediction() {
        let (s, _) = toy_subject();
        let m = toy_model(EncoderKind::Simta);
        let a = m.predict_proba(&s, &task(&s)).unwrap();
        let b = m.clone().predict_proba(&s, &task(&s)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn ablation_shrinks_the_model() {
        let c = small_cohort(6, 1);
        let full = FusionModel::for_cohort(&mut Rng::new(1), FusionConfig::default(), &c).unwrap();
        let cfg = FusionConfig {
            ablate: vec![Ablation::Radiomics],
            ..FusionConfig::default()
        };
        let no_img = FusionModel::for_cohort(&mut Rng::new(1), cfg, &c).unwrap();
        assert_eq!(no_img.branches.len(), full.branches.len() - 1);
        assert!(no_img.branches.iter().all(|b| b.name != IMAGING));
        assert_eq!(no_img.head_input_dim(), full.head_input_dim() - 32);
        assert_eq!(no_img.static_encoder.input_dim(), c.static_dim());
        assert_eq!(full.static_encoder.input_dim(), c.static_dim() + 107 + 1);
    }

    #[test]
    fn lstm_fusion_has_comparable_size() {
        let c = small_cohort(6, 2);
        let simta = FusionModel::for_cohort(&mut Rng::new(1), FusionConfig::default(), &c).unwrap();
        for v in [
            LstmVariant::Plain,
            LstmVariant::Interval,
            LstmVariant::Stamp,
        ] {
            let cfg = FusionConfig {
                encoder: EncoderKind::Lstm(v),
                ..FusionConfig::default()
            };
            let lstm = FusionModel::for_cohort(&mut Rng::new(1), cfg, &c).unwrap();
            let ratio = lstm.num_params() as f64 / simta.num_params() as f64;
            assert!((0.8..=1.2).contains(&ratio), "{v:?}: {ratio}");
        }
    }

    #[test]
    fn normalization_reads_training_subjects_only() {
        let c = small_cohort(12, 3);
        let train: Vec<usize> = (0..8).collect();
        let mut m = FusionModel::for_cohort(&mut Rng::new(1), FusionConfig::default(), &c).unwrap();
        m.fit_normalization(&c, &train).unwrap();
        let mut poisoned = c.clone();
        for s in &mut poisoned.subjects[8..] {
            s.static_features.iter_mut().for_each(|v| *v += 1e6);
            for series in s.modalities.values_mut() {
                *series = series.map_values(|_, v| v * 1e3);
            }
        }
        let mut m2 =
            FusionModel::for_cohort(&mut Rng::new(1), FusionConfig::default(), &c).unwrap();
        m2.fit_normalization(&poisoned, &train).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn standardizer_fit() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(2, rows.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 6.0]), vec![1.0, 1.0]);
        assert!(Standardizer::fit(2, std::iter::empty()).is_err());
    }
}
