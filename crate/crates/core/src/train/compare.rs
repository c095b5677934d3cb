//! Side-by-side comparison of model variants under identical seeds and folds.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::{cross_validate, CvResult};
use super::config::{ModelKind, TrainConfig};
use super::metrics::MetricLog;
use super::synthetic::{train_synthetic, SyntheticRun};
use crate::data::{BenchmarkEntry, Cohort};
use crate::error::{Error, Result};
use crate::fusion::{Ablation, FusionConfig};
use crate::numerics::ParamSet;
use crate::output::{atomic_write, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Synthetic,
    Cohort,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Suite::Synthetic),
            "cohort" => Ok(Suite::Cohort),
            other => Err(Error::Config(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub metric: String,
    pub value: f64,
    /// Published value for the same variant, for display only.
    pub reference: Option<f64>,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub suite: Suite,
    pub rows: Vec<ComparisonRow>,
    /// Loss curves keyed by a file-name-safe id.
    #[serde(skip)]
    pub curves: Vec<(String, MetricLog)>,
}

fn file_id(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect::<String>()
        .trim_matches('_')
        .replace("__", "_")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

impl Comparison {
    pub fn row(&self, variant: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,metric,value,reference,params\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.variant,
                r.metric,
                r.value,
                fmt_opt(r.reference),
                r.params
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Variant | Metric | Value | Reference | Params |\n|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let reference = r
                .reference
                .map_or_else(|| "-".to_string(), |p| format!("{p}"));
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} | {} | {} |",
                r.variant, r.metric, r.value, reference, r.params
            );
        }
        out
    }

    /// Writes `table.md`, `table.csv` and `curves/<id>.csv`. Each file is
    /// replaced atomically and only after every variant has finished.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        for (id, log) in &self.curves {
            atomic_write(
                &out_dir.join("curves").join(format!("{id}.csv")),
                log.to_csv().as_bytes(),
            )?;
        }
        atomic_write(&out_dir.join("table.csv"), self.to_csv().as_bytes())?;
        atomic_write(&out_dir.join("table.md"), self.to_markdown().as_bytes())
    }
}

/// Reference validation MSE per model on the synthetic benchmark.
pub fn reference_synthetic_mse(kind: ModelKind) -> Option<f64> {
    match kind {
        ModelKind::Simta => Some(2.197),
        ModelKind::Lstm | ModelKind::LstmI | ModelKind::LstmS => Some(6.427),
        ModelKind::Fusion => None,
    }
}

pub struct SyntheticComparison {
    pub table: Comparison,
    pub runs: Vec<SyntheticRun>,
}

/// Trains each kind on the same benchmark with the same seed.
pub fn compare_synthetic(
    entries: &[BenchmarkEntry],
    base: &TrainConfig,
    kinds: &[ModelKind],
) -> Result<SyntheticComparison> {
    let runs: Vec<SyntheticRun> = kinds
        .par_iter()
        .map(|&model| {
            train_synthetic(
                entries,
                &TrainConfig {
                    model,
                    ..base.clone()
                },
            )
        })
        .collect::<Result<_>>()?;
    let rows = runs
        .iter()
        .map(|r| ComparisonRow {
            variant: r.kind.label().to_string(),
            metric: "val_mse".into(),
            value: r.log.final_val_loss().unwrap_or(f64::NAN),
            reference: reference_synthetic_mse(r.kind),
            params: r.model.num_params(),
        })
        .collect();
    let curves = runs
        .iter()
        .map(|r| (file_id(r.kind.label()), r.log.clone()))
        .collect();
    Ok(SyntheticComparison {
        table: Comparison {
            suite: Suite::Synthetic,
            rows,
            curves,
        },
        runs,
    })
}

/// Final SimTA validation MSE over the best LSTM variant's.
pub fn simta_lstm_ratio(runs: &[SyntheticRun]) -> Option<f64> {
    let simta = runs
        .iter()
        .find(|r| r.kind == ModelKind::Simta)?
        .log
        .final_val_loss()?;
    let best = runs
        .iter()
        .filter(|r| r.kind != ModelKind::Simta)
        .filter_map(|r| r.log.final_val_loss())
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))?;
    Some(simta / best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Largest of the LSTM variants' lowest training losses, so every
    /// variant reaches it.
    pub threshold: f64,
    pub epochs: Vec<(ModelKind, Option<usize>)>,
}

impl Convergence {
    pub fn epochs_for(&self, kind: ModelKind) -> Option<usize> {
        self.epochs
            .iter()
            .find(|(k, _)| *k == kind)
            .and_then(|(_, e)| *e)
    }

    /// Whether LSTM(i) and LSTM(s) reach the threshold no later than LSTM.
    pub fn time_aware_not_slower(&self) -> bool {
        let Some(plain) = self.epochs_for(ModelKind::Lstm) else {
            return true;
        };
        [ModelKind::LstmI, ModelKind::LstmS]
            .iter()
            .all(|&k| self.epochs_for(k).is_some_and(|e| e <= plain))
    }
}

pub fn convergence(runs: &[SyntheticRun]) -> Option<Convergence> {
    let lstm: Vec<&SyntheticRun> = runs
        .iter()
        .filter(|r| {
            matches!(
                r.kind,
                ModelKind::Lstm | ModelKind::LstmI | ModelKind::LstmS
            )
        })
        .collect();
    if lstm.is_empty() {
        return None;
    }
    let threshold = lstm
        .iter()
        .map(|r| {
            r.log
                .epochs
                .iter()
                .map(|e| e.train_loss)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Some(Convergence {
        threshold,
        epochs: lstm
            .iter()
            .map(|r| (r.kind, r.log.epochs_to_train_loss(threshold)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortVariant {
    pub label: String,
    pub model: ModelKind,
    pub ablate: Vec<Ablation>,
    pub reference: Option<f64>,
}

/// The six response-prediction rows: three LSTM fusion models, the full
/// SimTA fusion model and its two single-modality ablations.
pub fn cohort_variants() -> Vec<CohortVariant> {
    let v = |label: &str, model, ablate: Vec<Ablation>, reference| CohortVariant {
        label: label.to_string(),
        model,
        ablate,
        reference: Some(reference),
    };
    vec![
        v("LSTM", ModelKind::Lstm, vec![], 0.71),
        v("LSTM(i)", ModelKind::LstmI, vec![], 0.71),
        v("LSTM(s)", ModelKind::LstmS, vec![], 0.70),
        v("Ours", ModelKind::Fusion, vec![], 0.80),
        v(
            "Ours w/o radiomics",
            ModelKind::Fusion,
            vec![Ablation::Radiomics],
            0.47,
        ),
        v("Ours w/o lab", ModelKind::Fusion, vec![Ablation::Lab], 0.58),
    ]
}

pub fn fusion_config_for(variant: &CohortVariant, base: &FusionConfig) -> FusionConfig {
    FusionConfig {
        encoder: variant.model.encoder_kind(),
        ablate: variant.ablate.clone(),
        ..base.clone()
    }
}

pub struct CohortComparison {
    pub table: Comparison,
    pub results: Vec<(CohortVariant, CvResult)>,
}

/// Cross-validates every variant on the same folds and seed. Rows report
/// the pooled held-out AUC.
pub fn compare_cohort(
    cohort: &Cohort,
    base: &TrainConfig,
    fusion: &FusionConfig,
    variants: &[CohortVariant],
) -> Result<CohortComparison> {
    let results: Vec<(CohortVariant, CvResult)> = variants
        .par_iter()
        .map(|v| {
            let cfg = TrainConfig {
                model: v.model,
                ablate: v.ablate.clone(),
                ..base.clone()
            };
            cross_validate(cohort, &cfg, &fusion_config_for(v, fusion)).map(|r| (v.clone(), r))
        })
        .collect::<Result<_>>()?;
    let rows = results
        .iter()
        .map(|(v, r)| ComparisonRow {
            variant: v.label.clone(),
            metric: "auc".into(),
            value: r.pooled_auc,
            reference: v.reference,
            params: r.folds[0].model.num_params(),
        })
        .collect();
    let curves = results
        .iter()
        .flat_map(|(v, r)| {
            r.folds.iter().map(move |f| {
                (
                    format!("{}_fold{}", file_id(&v.label), f.fold),
                    f.log.clone(),
                )
            })
        })
        .collect();
    Ok(CohortComparison {
        table: Comparison {
            suite: Suite::Cohort,
            rows,
            curves,
        },
        results,
    })
}

/// Summary JSON written next to the comparison table.
pub fn write_summary<T: Serialize>(out_dir: &Path, summary: &T) -> Result<()> {
    write_json(&out_dir.join("summary.json"), summary)
}
