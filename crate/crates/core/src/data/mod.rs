//! Data generators and file formats.

mod cohort;
mod io;
mod synth;

pub use cohort::{
    gen_mia_cohort, Assessment, Cohort, CohortConfig, CohortGenerator, FeatureLayout, Outcome,
    PlantedWeights, SubjectRecord, IMAGING, INTERVENTION, LAB, N_FOLDS,
};
pub use io::{
    benchmark_from_jsonl, benchmark_to_jsonl, cohort_from_jsonl, cohort_to_jsonl, load_benchmark,
    load_cohort, save_benchmark, save_cohort,
};
pub use synth::{
    gen_trig_series, sample_instance, BenchmarkEntry, SampledInstance, SamplingConfig, Split,
    SynthConfig, TrigComponent, TrigSeriesSpec, INPUT_POINTS, TARGET_OFFSETS,
};
