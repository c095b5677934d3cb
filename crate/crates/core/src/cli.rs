//! Command-line interface.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::checks::{run_checks, CheckModule};
use crate::data::{
    gen_trig_series, load_benchmark, load_cohort, save_benchmark, save_cohort, CohortConfig,
    CohortGenerator, SynthConfig,
};
use crate::error::{Error, Result};
use crate::fusion::{Ablation, FusionConfig};
use crate::numerics::{ParamSet, Rng};
use crate::output::{atomic_write, save_checkpoint, write_json, RunManifest};
use crate::survival::{
    endpoint_report, endpoint_samples, km_csv, km_svg, subject_risk, Endpoint, RiskGroup,
};
use crate::train::{
    cohort_variants, compare_cohort, compare_synthetic, convergence, cross_validate,
    predictions_from_csv, predictions_to_csv, simta_lstm_ratio, train_synthetic, write_summary,
    ModelKind, Suite, TrainConfig,
};

/// Version line printed by `--version`.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (format 1)");

/// Environment variable capping `compare` parallelism.
pub const THREADS_ENV: &str = "SIMTA_THREADS";

#[derive(Debug, Parser)]
#[command(name = "simta", version = VERSION, about = "Temporal attention over asynchronous series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark or cohort
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
    /// Train one model
    Train(TrainArgs),
    /// Train every variant of a suite and tabulate the results
    Compare(CompareArgs),
    /// Run finite-difference gradient checks
    Gradcheck(GradcheckArgs),
    /// Kaplan-Meier curves and log-rank tests from held-out predictions
    Survival(SurvivalArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Trigonometric series benchmark
    Synth(GenSynthArgs),
    /// Synthetic cohort with planted signal
    Cohort(GenCohortArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenSynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    /// Trigonometric components per series
    #[arg(long, default_value_t = 10)]
    pub components: usize,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub omega_min: f64,
    #[arg(long, default_value_t = 0.2)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenCohortArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 99)]
    pub subjects: usize,
    /// Observation noise in standardized units
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: ModelKind,
    /// Benchmark or cohort JSONL file
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    /// Largest sampling interval for benchmark instances
    #[arg(long, default_value_t = 2.0)]
    pub interval: f64,
    /// Drop a branch of the fusion model (radiomics, lab, interventions)
    #[arg(long)]
    pub ablate: Vec<Ablation>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Use this data file instead of generating one from the seed
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Series to generate for the synthetic suite
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    /// Subjects to generate for the cohort suite
    #[arg(long, default_value_t = 99)]
    pub subjects: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2.0)]
    pub interval: f64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "all")]
    pub module: CheckModule,
    /// Perturb analytic gradients so every check fails
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SurvivalArgs {
    /// Held-out predictions CSV written by `train`
    #[arg(long)]
    pub preds: PathBuf,
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub cutoff: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(cli, &mut std::io::stdout()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    match cli.command {
        Command::Gen {
            what: GenCommand::Synth(a),
        } => gen_synth(&a, out),
        Command::Gen {
            what: GenCommand::Cohort(a),
        } => gen_cohort(&a, out),
        Command::Train(a) => with_pool(1, || train(&a, out)),
        Command::Compare(a) => with_pool(threads_from_env()?, || compare(&a, out)),
        Command::Gradcheck(a) => gradcheck(&a, out),
        Command::Survival(a) => survival(&a, out),
    }
}

fn config_echo<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

/// Thread cap from `SIMTA_THREADS`, defaulting to the available cores.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn with_pool<T>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

fn say(out: &mut (dyn Write + Send), line: impl AsRef<str>) {
    let _ = writeln!(out, "{}", line.as_ref());
}

fn gen_synth(a: &GenSynthArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let started = Instant::now();
    let cfg = SynthConfig {
        count: a.count,
        n_components: a.components,
        eta: a.eta,
        omega_range: (a.omega_min, a.omega_max),
        train_fraction: a.train_fraction,
        ..SynthConfig::default()
    };
    let entries = gen_trig_series(&mut Rng::new(a.seed), &cfg)?;
    save_benchmark(&entries, &a.out.join("benchmark.jsonl"))?;
    RunManifest::start("gen synth", config_echo(a), a.seed).finish(&a.out, started)?;
    say(
        out,
        format!("wrote {} series to {}", entries.len(), a.out.display()),
    );
    Ok(())
}

fn gen_cohort(a: &GenCohortArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let started = Instant::now();
    let cfg = CohortConfig {
        n_subjects: a.subjects,
        noise: a.noise,
        ..CohortConfig::default()
    };
    let cohort = CohortGenerator::new(cfg, a.seed)?.generate()?;
    save_cohort(&cohort, &a.out.join("cohort.jsonl"))?;
    RunManifest::start("gen cohort", config_echo(a), a.seed).finish(&a.out, started)?;
    say(
        out,
        format!(
            "wrote {} subjects ({} assessments) to {}",
            cohort.subjects.len(),
            cohort.n_assessments(),
            a.out.display()
        ),
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Benchmark,
    Cohort,
}

/// Tells benchmark files from cohort files by the first record's keys.
pub fn detect_data_kind(path: &Path) -> Result<DataKind> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Schema(format!("{} is empty", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(first).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if value.get("spec").is_some() {
        Ok(DataKind::Benchmark)
    } else if value.get("id").is_some() {
        Ok(DataKind::Cohort)
    } else {
        Err(Error::Schema(format!(
            "{}: first record is neither a benchmark series nor a subject",
            path.display()
        )))
    }
}

#[derive(Serialize)]
struct SyntheticSummary {
    model: ModelKind,
    seed: u64,
    epochs: usize,
    params: usize,
    final_train_loss: Option<f64>,
    final_val_loss: Option<f64>,
}

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    auc: Option<f64>,
    predictions: usize,
    abstained: usize,
    final_train_loss: Option<f64>,
}

#[derive(Serialize)]
struct CohortSummary {
    model: ModelKind,
    ablate: Vec<Ablation>,
    seed: u64,
    epochs: usize,
    params: usize,
    pooled_auc: f64,
    mean_fold_auc: Option<f64>,
    null_stderr: f64,
    folds: Vec<FoldSummary>,
}

fn train(a: &TrainArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let started = Instant::now();
    let kind = detect_data_kind(&a.data)?;
    let mut manifest = RunManifest::start("train", config_echo(a), a.seed);
    manifest.add_input(&a.data)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        seed: a.seed,
        model: a.model,
        ablate: a.ablate.clone(),
        max_interval: a.interval,
        ..match kind {
            DataKind::Benchmark => TrainConfig::synthetic(a.model, a.seed),
            DataKind::Cohort => TrainConfig::cohort(a.model, a.seed),
        }
    };
    cfg.validate()?;
    match kind {
        DataKind::Benchmark => {
            if !a.ablate.is_empty() {
                return Err(Error::Config(
                    "--ablate applies to cohort training only".into(),
                ));
            }
            let entries = load_benchmark(&a.data)?;
            let run = train_synthetic(&entries, &cfg)?;
            save_checkpoint(
                &a.out.join("checkpoint.json"),
                a.model.id(),
                a.seed,
                &run.model,
            )?;
            atomic_write(&a.out.join("metrics.csv"), run.log.to_csv().as_bytes())?;
            let summary = SyntheticSummary {
                model: a.model,
                seed: a.seed,
                epochs: a.epochs,
                params: run.model.num_params(),
                final_train_loss: run.log.final_train_loss(),
                final_val_loss: run.log.final_val_loss(),
            };
            write_summary(&a.out, &summary)?;
            say(
                out,
                format!(
                    "{}: final train {:.4} val {:.4}",
                    a.model.label(),
                    summary.final_train_loss.unwrap_or(f64::NAN),
                    summary.final_val_loss.unwrap_or(f64::NAN)
                ),
            );
        }
        DataKind::Cohort => {
            let cohort = load_cohort(&a.data)?;
            let fusion = FusionConfig {
                encoder: a.model.encoder_kind(),
                ablate: a.ablate.clone(),
                ..FusionConfig::default()
            };
            fusion.validate()?;
            let cv = cross_validate(&cohort, &cfg, &fusion)?;
            for f in &cv.folds {
                save_checkpoint(
                    &a.out.join(format!("checkpoint_fold{}.json", f.fold)),
                    "fusion",
                    a.seed,
                    &f.model,
                )?;
                atomic_write(
                    &a.out.join(format!("metrics_fold{}.csv", f.fold)),
                    f.log.to_csv().as_bytes(),
                )?;
            }
            let preds: Vec<_> = cv.predictions().cloned().collect();
            atomic_write(
                &a.out.join("predictions.csv"),
                predictions_to_csv(&preds).as_bytes(),
            )?;
            let summary = CohortSummary {
                model: a.model,
                ablate: a.ablate.clone(),
                seed: a.seed,
                epochs: a.epochs,
                params: cv.folds[0].model.num_params(),
                pooled_auc: cv.pooled_auc,
                mean_fold_auc: cv.mean_fold_auc,
                null_stderr: cv.null_stderr,
                folds: cv
                    .folds
                    .iter()
                    .map(|f| FoldSummary {
                        fold: f.fold,
                        auc: f.auc,
                        predictions: f.predictions.len(),
                        abstained: f.abstained,
                        final_train_loss: f.log.final_train_loss(),
                    })
                    .collect(),
            };
            write_summary(&a.out, &summary)?;
            say(
                out,
                format!(
                    "pooled AUC {:.3} (null SE {:.3}) over {} predictions",
                    cv.pooled_auc,
                    cv.null_stderr,
                    preds.len()
                ),
            );
        }
    }
    manifest.finish(&a.out, started)
}

#[derive(Serialize)]
struct SyntheticCompareSummary {
    suite: Suite,
    seed: u64,
    series: usize,
    epochs: usize,
    val_mse: BTreeMap<String, f64>,
    simta_lstm_ratio: Option<f64>,
    convergence: Option<crate::train::Convergence>,
}

#[derive(Serialize)]
struct CohortVariantSummary {
    variant: String,
    pooled_auc: f64,
    mean_fold_auc: Option<f64>,
    fold_aucs: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct CohortCompareSummary {
    suite: Suite,
    seed: u64,
    subjects: usize,
    assessments: usize,
    epochs: usize,
    null_stderr: f64,
    variants: Vec<CohortVariantSummary>,
}

fn compare(a: &CompareArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::start("compare", config_echo(a), a.seed);
    if let Some(p) = &a.data {
        manifest.add_input(p)?;
    }
    match a.suite {
        Suite::Synthetic => {
            let entries = match &a.data {
                Some(p) => load_benchmark(p)?,
                None => gen_trig_series(
                    &mut Rng::new(a.seed),
                    &SynthConfig {
                        count: a.count,
                        ..SynthConfig::default()
                    },
                )?,
            };
            let base = TrainConfig {
                epochs: a.epochs,
                max_interval: a.interval,
                ..TrainConfig::synthetic(ModelKind::Simta, a.seed)
            };
            let cmp = compare_synthetic(&entries, &base, &ModelKind::SEQUENCE)?;
            cmp.table.write(&a.out)?;
            let summary = SyntheticCompareSummary {
                suite: a.suite,
                seed: a.seed,
                series: entries.len(),
                epochs: a.epochs,
                val_mse: cmp
                    .table
                    .rows
                    .iter()
                    .map(|r| (r.variant.clone(), r.value))
                    .collect(),
                simta_lstm_ratio: simta_lstm_ratio(&cmp.runs),
                convergence: convergence(&cmp.runs),
            };
            write_summary(&a.out, &summary)?;
            let _ = write!(out, "{}", cmp.table.to_markdown());
            if let Some(r) = summary.simta_lstm_ratio {
                say(out, format!("SimTA / best LSTM validation MSE: {r:.3}"));
            }
        }
        Suite::Cohort => {
            let cohort = match &a.data {
                Some(p) => load_cohort(p)?,
                None => CohortGenerator::new(
                    CohortConfig {
                        n_subjects: a.subjects,
                        ..CohortConfig::default()
                    },
                    a.seed,
                )?
                .generate()?,
            };
            let base = TrainConfig {
                epochs: a.epochs,
                ..TrainConfig::cohort(ModelKind::Fusion, a.seed)
            };
            let cmp = compare_cohort(&cohort, &base, &FusionConfig::default(), &cohort_variants())?;
            cmp.table.write(&a.out)?;
            let summary = CohortCompareSummary {
                suite: a.suite,
                seed: a.seed,
                subjects: cohort.subjects.len(),
                assessments: cohort.n_assessments(),
                epochs: a.epochs,
                null_stderr: cmp.results.first().map_or(f64::NAN, |(_, r)| r.null_stderr),
                variants: cmp
                    .results
                    .iter()
                    .map(|(v, r)| CohortVariantSummary {
                        variant: v.label.clone(),
                        pooled_auc: r.pooled_auc,
                        mean_fold_auc: r.mean_fold_auc,
                        fold_aucs: r.folds.iter().map(|f| f.auc).collect(),
                    })
                    .collect(),
            };
            write_summary(&a.out, &summary)?;
            let _ = write!(out, "{}", cmp.table.to_markdown());
        }
    }
    manifest.finish(&a.out, started)
}

fn gradcheck(a: &GradcheckArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let results = run_checks(a.module, a.inject_fault)?;
    let mut failed = Vec::new();
    for r in &results {
        say(
            out,
            format!(
                "{:14} {:>5} params  max rel err {:.3e}  {}",
                r.name,
                r.n_params,
                r.max_rel_err,
                if r.passed { "PASS" } else { "FAIL" }
            ),
        );
        for g in &r.groups {
            say(
                out,
                format!(
                    "    {:36} {:>5}  {:.3e}",
                    g.group, g.n_params, g.max_rel_err
                ),
            );
        }
        if !r.passed {
            failed.push(r.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::GradCheck(failed.join(", ")))
    }
}

#[derive(Serialize)]
struct EndpointSummary {
    endpoint: Endpoint,
    n_low: usize,
    n_high: usize,
    statistic: Option<f64>,
    p_value: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SurvivalSummary {
    cutoff: f64,
    subjects: usize,
    endpoints: Vec<EndpointSummary>,
}

fn survival(a: &SurvivalArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let started = Instant::now();
    if !(0.0..=1.0).contains(&a.cutoff) {
        return Err(Error::Config(format!(
            "cutoff must lie in [0, 1], got {}",
            a.cutoff
        )));
    }
    let mut manifest = RunManifest::start("survival", config_echo(a), 0);
    manifest.add_input(&a.preds)?;
    manifest.add_input(&a.cohort)?;
    let text = std::fs::read_to_string(&a.preds).map_err(|e| Error::io(&a.preds, e))?;
    let preds = predictions_from_csv(&text)?;
    let cohort = load_cohort(&a.cohort)?;
    let risk = subject_risk(&preds);
    if !cohort.subjects.iter().any(|s| risk.contains_key(&s.id)) {
        return Err(Error::Data(
            "no predicted subject appears in the cohort".into(),
        ));
    }
    let mut endpoints = Vec::new();
    for endpoint in Endpoint::ALL {
        let samples = endpoint_samples(&cohort, &risk, a.cutoff, endpoint);
        let report = endpoint_report(&samples, endpoint)?;
        let sizes = [
            (RiskGroup::Low, report.n_low),
            (RiskGroup::High, report.n_high),
        ]
        .into_iter()
        .collect();
        let label = endpoint.label();
        atomic_write(
            &a.out.join(format!("km_{label}.csv")),
            km_csv(&report.curves, &sizes).as_bytes(),
        )?;
        let title = label.to_uppercase();
        let p = report.logrank.map(|l| l.p_value);
        atomic_write(
            &a.out.join(format!("km_{label}.svg")),
            km_svg(&title, &report.curves, p).as_bytes(),
        )?;
        say(
            out,
            format!(
                "{title}: low {} high {}  p = {}",
                report.n_low,
                report.n_high,
                p.map_or("undefined".to_string(), |p| format!("{p:.3e}"))
            ),
        );
        endpoints.push(EndpointSummary {
            endpoint,
            n_low: report.n_low,
            n_high: report.n_high,
            statistic: report.logrank.map(|l| l.statistic),
            p_value: p,
            error: report.error,
        });
    }
    let undefined: Vec<String> = endpoints
        .iter()
        .filter_map(|e| {
            e.error
                .as_ref()
                .map(|m| format!("{}: {m}", e.endpoint.label()))
        })
        .collect();
    write_json(
        &a.out.join("logrank.json"),
        &SurvivalSummary {
            cutoff: a.cutoff,
            subjects: risk.len(),
            endpoints,
        },
    )?;
    manifest.finish(&a.out, started)?;
    if undefined.is_empty() {
        Ok(())
    } else {
        Err(Error::UndefinedTest(undefined.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn version_mentions_format() {
        assert_eq!(
            VERSION,
            format!(
                "{} (format {})",
                crate::output::TOOL_VERSION,
                crate::output::FORMAT_VERSION
            )
        );
    }

    #[test]
    fn missing_out_is_a_usage_error() {
        let err = Cli::try_parse_from(["simta", "gen", "synth", "--seed", "7"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_model_is_a_usage_error() {
        let err = Cli::try_parse_from([
            "simta", "train", "--model", "gru", "--data", "x", "--out", "y",
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn data_kind_detection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        std::fs::write(&p, "\n{\"id\":\"s1\"}\n").unwrap();
        assert_eq!(detect_data_kind(&p).unwrap(), DataKind::Cohort);
        std::fs::write(&p, "{\"spec\":{}}\n").unwrap();
        assert_eq!(detect_data_kind(&p).unwrap(), DataKind::Benchmark);
        std::fs::write(&p, "{\"other\":1}\n").unwrap();
        assert!(matches!(detect_data_kind(&p), Err(Error::Schema(_))));
        std::fs::write(&p, "not json\n").unwrap();
        assert!(matches!(detect_data_kind(&p), Err(Error::Parse { .. })));
        assert!(matches!(
            detect_data_kind(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn gradcheck_exit_codes() {
        let run_gc = |inject: bool| {
            run(
                Cli {
                    command: Command::Gradcheck(GradcheckArgs {
                        module: CheckModule::Lstm,
                        inject_fault: inject,
                    }),
                },
                &mut Vec::new(),
            )
        };
        assert!(run_gc(false).is_ok());
        assert_eq!(run_gc(true).unwrap_err().exit_code(), 5);
    }
}
