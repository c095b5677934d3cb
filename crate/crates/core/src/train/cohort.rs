//! Response classification on a cohort with subject-level cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{LossKind, TrainConfig};
use super::metrics::{auc, MetricLog};
use crate::data::{Cohort, N_FOLDS};
use crate::error::{Error, Result};
use crate::fusion::{
    proba_from_scores, tasks_for, FusionConfig, FusionModel, PredictionTask, PreparedInput,
};
use crate::numerics::{adam_step, cross_entropy_loss, AdamState, Matrix, ParamSet, Rng};

const MODEL_STREAM: u64 = 1 << 42;
const EPOCH_STREAM: u64 = 1 << 43;

/// Held-out prediction for one assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub subject_id: String,
    pub fold: usize,
    pub assessment_t: f64,
    pub label: u8,
    pub proba: f64,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub model: FusionModel,
    pub log: MetricLog,
    pub predictions: Vec<Prediction>,
    /// `None` when the held-out fold has a single class.
    pub auc: Option<f64>,
    /// Assessments skipped for lack of visible serial data.
    pub abstained: usize,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    /// AUC of all held-out predictions pooled together.
    pub pooled_auc: f64,
    pub mean_fold_auc: Option<f64>,
    /// Standard deviation of the AUC under random labels, for the pooled set.
    pub null_stderr: f64,
}

impl CvResult {
    pub fn predictions(&self) -> impl Iterator<Item = &Prediction> {
        self.folds.iter().flat_map(|f| &f.predictions)
    }
}

pub fn predictions_to_csv(predictions: &[Prediction]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in predictions {
        w.serialize(p).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}

pub fn predictions_from_csv(text: &str) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            let p: Prediction = row.map_err(|e| Error::Parse {
                line: i + 2,
                msg: e.to_string(),
            })?;
            if !(0.0..=1.0).contains(&p.proba) {
                return Err(Error::Data(format!(
                    "line {}: probability {} outside [0, 1]",
                    i + 2,
                    p.proba
                )));
            }
            Ok(p)
        })
        .collect()
}

/// Standard deviation of the Mann-Whitney AUC when scores are independent
/// of labels (no ties).
pub fn auc_null_stderr(n_pos: usize, n_neg: usize) -> f64 {
    let (p, n) = (n_pos as f64, n_neg as f64);
    ((p + n + 1.0) / (12.0 * p * n)).sqrt()
}

fn prepare_all(
    model: &FusionModel,
    cohort: &Cohort,
    tasks: &[PredictionTask],
) -> Result<(Vec<(PredictionTask, PreparedInput)>, usize)> {
    let mut out = Vec::with_capacity(tasks.len());
    let mut abstained = 0;
    for t in tasks {
        match model.prepare(&cohort.subjects[t.subject], t) {
            Ok(p) => out.push((*t, p)),
            Err(Error::InsufficientData(_)) => abstained += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, abstained))
}

fn mean_loss(model: &FusionModel, set: &[(PredictionTask, PreparedInput)]) -> Result<f64> {
    let mut total = 0.0;
    for (t, p) in set {
        let (s, _) = model.forward_prepared(p)?;
        total += cross_entropy_loss(&Matrix::row_vector(&s), &[t.label])?.0;
    }
    Ok(total / set.len().max(1) as f64)
}

/// Trains on every fold except `fold` and predicts the assessments of
/// `fold`. Only training subjects are read to fit normalization.
pub fn train_fold(
    cohort: &Cohort,
    fold: usize,
    cfg: &TrainConfig,
    fusion: &FusionConfig,
) -> Result<FoldResult> {
    cfg.validate()?;
    if cfg.loss != LossKind::Bce {
        return Err(Error::Config(
            "cohort classification is trained with bce loss".into(),
        ));
    }
    if fold >= N_FOLDS {
        return Err(Error::Config(format!(
            "fold must be below {N_FOLDS}, got {fold}"
        )));
    }
    let eval: Vec<usize> = cohort.fold_members(fold);
    let train: Vec<usize> = (0..cohort.subjects.len())
        .filter(|&i| cohort.folds[i] != fold)
        .collect();
    if eval.is_empty() || train.is_empty() {
        return Err(Error::Data(format!(
            "fold {fold} leaves an empty train or eval set"
        )));
    }

    let mut model = FusionModel::for_cohort(
        &mut Rng::derive(cfg.seed, MODEL_STREAM + fold as u64),
        fusion.clone(),
        cohort,
    )?;
    model.fit_normalization(cohort, &train)?;
    let (train_set, _) = prepare_all(
        &model,
        cohort,
        &tasks_for(cohort, &train, fusion.horizon_days),
    )?;
    let (eval_set, abstained) = prepare_all(
        &model,
        cohort,
        &tasks_for(cohort, &eval, fusion.horizon_days),
    )?;
    if train_set.is_empty() {
        return Err(Error::Data(format!(
            "fold {fold}: no trainable assessments"
        )));
    }

    let mut flat = model.to_flat();
    let mut adam = AdamState::new(flat.len(), cfg.lr);
    let mut grad = model.zeros_like();
    let mut log = MetricLog::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        Rng::derive(cfg.seed, EPOCH_STREAM + (epoch * N_FOLDS + fold) as u64).shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &k in batch {
                let (t, p) = &train_set[k];
                total += model.loss_and_grad(p, t.label, &mut grad)?;
            }
            grad.scale_all(1.0 / batch.len() as f64);
            adam_step(&mut flat, &grad.to_flat(), &mut adam)?;
            model.load_flat(&flat);
        }
        let train_loss = total / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numeric {
                index: epoch,
                value: train_loss,
            });
        }
        log.push(train_loss, mean_loss(&model, &eval_set)?);
    }

    let mut predictions = Vec::with_capacity(eval_set.len());
    for (t, p) in &eval_set {
        let (s, _) = model.forward_prepared(p)?;
        predictions.push(Prediction {
            subject_id: cohort.subjects[t.subject].id.clone(),
            fold,
            assessment_t: t.assessment_t,
            label: t.label,
            proba: proba_from_scores(s),
        });
    }
    let (scores, labels): (Vec<f64>, Vec<u8>) =
        predictions.iter().map(|p| (p.proba, p.label)).unzip();
    let fold_auc = match auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(a) = fold_auc {
        log.fold_auc.push(a);
    }
    Ok(FoldResult {
        fold,
        model,
        log,
        predictions,
        auc: fold_auc,
        abstained,
    })
}

/// Trains all folds (in parallel on the current rayon pool) and pools the
/// held-out predictions.
pub fn cross_validate(
    cohort: &Cohort,
    cfg: &TrainConfig,
    fusion: &FusionConfig,
) -> Result<CvResult> {
    let folds: Vec<FoldResult> = (0..N_FOLDS)
        .into_par_iter()
        .map(|f| train_fold(cohort, f, cfg, fusion))
        .collect::<Result<_>>()?;
    let (scores, labels): (Vec<f64>, Vec<u8>) = folds
        .iter()
        .flat_map(|f| &f.predictions)
        .map(|p| (p.proba, p.label))
        .unzip();
    let pooled_auc = auc(&scores, &labels)?;
    let fold_aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
    let mean_fold_auc = (fold_aucs.len() == folds.len())
        .then(|| fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64);
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    Ok(CvResult {
        folds,
        pooled_auc,
        mean_fold_auc,
        null_stderr: auc_null_stderr(n_pos, labels.len() - n_pos),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CohortConfig, CohortGenerator};
    use crate::train::ModelKind;

    fn cohort(n: usize) -> Cohort {
        let cfg = CohortConfig {
            n_subjects: n,
            ..CohortConfig::default()
        };
        CohortGenerator::new(cfg, 21).unwrap().generate().unwrap()
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            ..TrainConfig::cohort(ModelKind::Fusion, 3)
        }
    }

    fn small() -> FusionConfig {
        FusionConfig {
            summary_dim: 8,
            static_hidden: 4,
            head_hidden: 8,
            ..FusionConfig::default()
        }
    }

    #[test]
    fn held_out_subjects_are_disjoint_from_training() {
        let c = cohort(12);
        let r = train_fold(&c, 1, &quick(1), &small()).unwrap();
        let eval_ids: Vec<&str> = c
            .fold_members(1)
            .iter()
            .map(|&i| c.subjects[i].id.as_str())
            .collect();
        assert!(!r.predictions.is_empty());
        for p in &r.predictions {
            assert!(eval_ids.contains(&p.subject_id.as_str()));
            assert_eq!(p.fold, 1);
        }
        assert_eq!(r.log.epochs.len(), 1);
    }

    #[test]
    fn eval_fold_contents_do_not_affect_the_trained_model() {
        let c = cohort(12);
        let mut poisoned = c.clone();
        for &i in &c.fold_members(2) {
            let s = &mut poisoned.subjects[i];
            s.static_features.iter_mut().for_each(|v| *v = 1e9);
            for series in s.modalities.values_mut() {
                *series = series.map_values(|_, v| -v * 1e4);
            }
        }
        let a = train_fold(&c, 2, &quick(2), &small()).unwrap();
        let b = train_fold(&poisoned, 2, &quick(2), &small()).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(
            a.log
                .epochs
                .iter()
                .map(|e| e.train_loss)
                .collect::<Vec<_>>(),
            b.log
                .epochs
                .iter()
                .map(|e| e.train_loss)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn bad_fold_and_loss() {
        let c = cohort(6);
        assert!(matches!(
            train_fold(&c, 3, &quick(1), &small()),
            Err(Error::Config(_))
        ));
        let mse = TrainConfig {
            loss: LossKind::Mse,
            ..quick(1)
        };
        assert!(matches!(
            train_fold(&c, 0, &mse, &small()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cross_validation_is_deterministic_and_complete() {
        let c = cohort(9);
        let a = cross_validate(&c, &quick(2), &small()).unwrap();
        let b = cross_validate(&c, &quick(2), &small()).unwrap();
        let pa: Vec<_> = a.predictions().cloned().collect();
        assert_eq!(pa, b.predictions().cloned().collect::<Vec<_>>());
        let abstained: usize = a.folds.iter().map(|f| f.abstained).sum();
        assert_eq!(pa.len() + abstained, c.n_assessments());
        assert!((0.0..=1.0).contains(&a.pooled_auc));
    }

    #[test]
    fn predictions_csv_round_trip() {
        let preds = vec![
            Prediction {
                subject_id: "S001".into(),
                fold: 2,
                assessment_t: 180.25,
                label: 1,
                proba: 1.0 / 3.0,
            },
            Prediction {
                subject_id: "S002".into(),
                fold: 0,
                assessment_t: 90.0,
                label: 0,
                proba: 0.5,
            },
        ];
        let text = predictions_to_csv(&preds);
        assert!(text.starts_with("subject_id,fold,assessment_t,label,proba\n"));
        assert_eq!(predictions_from_csv(&text).unwrap(), preds);
        let bad = text.replace("0.5", "1.5");
        assert!(matches!(predictions_from_csv(&bad), Err(Error::Data(_))));
        let broken = text.replace("S002,0", "S002,x");
        assert!(matches!(
            predictions_from_csv(&broken),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn null_stderr_matches_permutation_spread() {
        // Monte-Carlo permutation oracle for the closed form.
        let mut rng = Rng::new(8);
        let scores: Vec<f64> = (0..60).map(|_| rng.normal()).collect();
        let mut labels: Vec<u8> = (0..60).map(|i| (i < 25) as u8).collect();
        let draws: Vec<f64> = (0..4000)
            .map(|_| {
                rng.shuffle(&mut labels);
                auc(&scores, &labels).unwrap()
            })
            .collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd =
            (draws.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        let closed = auc_null_stderr(25, 35);
        assert!((sd - closed).abs() < 0.05 * closed, "{sd} vs {closed}");
    }
}
