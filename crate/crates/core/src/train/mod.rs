//! Training loops, metrics and model comparison.

mod cohort;
mod compare;
mod config;
mod metrics;
mod synthetic;

pub use cohort::{
    auc_null_stderr, cross_validate, predictions_from_csv, predictions_to_csv, train_fold,
    CvResult, FoldResult, Prediction,
};
pub use compare::{
    cohort_variants, compare_cohort, compare_synthetic, convergence, fusion_config_for,
    reference_synthetic_mse, simta_lstm_ratio, write_summary, CohortComparison, CohortVariant,
    Comparison, ComparisonRow, Convergence, Suite, SyntheticComparison,
};
pub use config::{LossKind, ModelKind, TrainConfig};
pub use metrics::{auc, EpochRecord, MetricLog};
pub use synthetic::{
    train_synthetic, train_synthetic_with, validation_instances, SeqModelConfig, SeqRegressor,
    SyntheticRun,
};
