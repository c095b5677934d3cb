use std::path::Path;
use std::process::{Command, Output};

use simta::data::{load_cohort, save_cohort, Outcome};
use simta::train::{predictions_to_csv, Prediction};

fn simta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simta"))
        .args(args)
        .env_remove("SIMTA_THREADS")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

fn gen_cohort(dir: &Path, subjects: usize) -> std::path::PathBuf {
    let out = dir.join("cohort");
    let r = simta(&[
        "gen",
        "cohort",
        "--seed",
        "7",
        "--subjects",
        &subjects.to_string(),
        "--out",
        p(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    out.join("cohort.jsonl")
}

#[test]
fn version_prints_tool_and_format() {
    let r = simta(&["--version"]);
    assert!(r.status.success());
    assert_eq!(
        String::from_utf8_lossy(&r.stdout).trim(),
        "simta 0.1.0 (format 1)"
    );
}

#[test]
fn gen_synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let r = simta(&[
            "gen",
            "synth",
            "--seed",
            "7",
            "--count",
            "10000",
            "--out",
            p(&dir.path().join(run)),
        ]);
        assert!(r.status.success());
    }
    let a = std::fs::read(dir.path().join("a/benchmark.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("b/benchmark.jsonl")).unwrap();
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 10_000);
    assert!(a == b);
    let m = json(&dir.path().join("a/manifest.json"));
    assert_eq!(m["command"], "gen synth");
    assert_eq!(m["config"]["count"], 10000);
}

#[test]
fn gen_cohort_has_three_folds_of_33() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = load_cohort(&gen_cohort(dir.path(), 99)).unwrap();
    assert_eq!(cohort.subjects.len(), 99);
    for f in 0..3 {
        assert_eq!(cohort.fold_members(f).len(), 33);
    }
}

#[test]
fn missing_out_is_a_usage_error() {
    let r = simta(&["gen", "synth", "--seed", "7"]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("--out") && err.contains("Usage"), "{err}");
    assert!(r.stdout.is_empty());
}

#[test]
fn exit_codes_for_io_data_and_config_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(&dir.path().join("o")).to_string();
    let r = simta(&[
        "train",
        "--model",
        "simta",
        "--data",
        "/nonexistent/x.jsonl",
        "--out",
        &out,
    ]);
    assert_eq!(r.status.code(), Some(3));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"spec\": 3}\n").unwrap();
    let r = simta(&[
        "train",
        "--model",
        "simta",
        "--data",
        p(&bad),
        "--out",
        &out,
    ]);
    assert_eq!(
        r.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );

    std::fs::write(&bad, "{\"neither\": 1}\n").unwrap();
    let r = simta(&[
        "train",
        "--model",
        "simta",
        "--data",
        p(&bad),
        "--out",
        &out,
    ]);
    assert_eq!(r.status.code(), Some(4));

    let r = Command::new(env!("CARGO_BIN_EXE_simta"))
        .args([
            "compare",
            "--suite",
            "synthetic",
            "--count",
            "10",
            "--epochs",
            "1",
            "--out",
            &out,
        ])
        .env("SIMTA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(2));

    let r = simta(&["train", "--model", "gru", "--data", p(&bad), "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn train_synthetic_writes_one_row_per_epoch_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(simta(&[
        "gen",
        "synth",
        "--seed",
        "3",
        "--count",
        "100",
        "--out",
        p(&data)
    ])
    .status
    .success());
    let bench = data.join("benchmark.jsonl");
    for run in ["a", "b"] {
        let r = simta(&[
            "train",
            "--model",
            "lstm_s",
            "--data",
            p(&bench),
            "--epochs",
            "1",
            "--seed",
            "5",
            "--out",
            p(&dir.path().join(run)),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let csv = read(&dir.path().join("a/metrics.csv"));
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "epoch,train_loss,val_loss");
    assert_eq!(
        read(&dir.path().join("a/summary.json")),
        read(&dir.path().join("b/summary.json"))
    );
    let ckpt = json(&dir.path().join("a/checkpoint.json"));
    assert_eq!(ckpt["kind"], "lstm_s");
    assert_eq!(ckpt["format_version"], 1);

    let r = simta(&[
        "train",
        "--model",
        "fusion",
        "--data",
        p(&bench),
        "--epochs",
        "1",
        "--out",
        p(&dir.path().join("c")),
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn train_fusion_ablation_and_survival_report() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = gen_cohort(dir.path(), 30);
    let train = dir.path().join("train");
    let r = simta(&[
        "train",
        "--model",
        "fusion",
        "--data",
        p(&cohort),
        "--epochs",
        "2",
        "--ablate",
        "radiomics",
        "--out",
        p(&train),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = json(&train.join("summary.json"));
    assert_eq!(summary["ablate"], serde_json::json!(["radiomics"]));
    for k in 0..3 {
        assert!(train.join(format!("checkpoint_fold{k}.json")).exists());
        assert_eq!(
            read(&train.join(format!("metrics_fold{k}.csv")))
                .lines()
                .count(),
            3
        );
    }
    assert!(read(&train.join("predictions.csv"))
        .starts_with("subject_id,fold,assessment_t,label,proba\n"));

    let mut n_low = Vec::new();
    for cutoff in ["0.1", "0.5", "0.9"] {
        let out = dir.path().join(format!("surv{cutoff}"));
        let r = simta(&[
            "survival",
            "--preds",
            p(&train.join("predictions.csv")),
            "--cohort",
            p(&cohort),
            "--cutoff",
            cutoff,
            "--out",
            p(&out),
        ]);
        assert!(
            matches!(r.status.code(), Some(0 | 4)),
            "{}",
            String::from_utf8_lossy(&r.stderr)
        );
        for f in [
            "km_pfs.csv",
            "km_pfs.svg",
            "km_os.csv",
            "km_os.svg",
            "logrank.json",
            "manifest.json",
        ] {
            assert!(out.join(f).exists(), "{f}");
        }
        n_low.push(
            json(&out.join("logrank.json"))["endpoints"][0]["n_low"]
                .as_u64()
                .unwrap(),
        );
    }
    assert!(n_low[0] >= n_low[1] && n_low[1] >= n_low[2], "{n_low:?}");
}

#[test]
fn survival_on_identical_groups_gives_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_cohort(dir.path(), 12);
    let mut cohort = load_cohort(&path).unwrap();
    let mut preds = Vec::new();
    for (i, s) in cohort.subjects.iter_mut().enumerate() {
        let t = 100.0 + 50.0 * (i / 2) as f64;
        s.pfs = Some(Outcome {
            time: t,
            event: i % 4 < 2,
        });
        s.os = Some(Outcome {
            time: t + 10.0,
            event: true,
        });
        preds.push(Prediction {
            subject_id: s.id.clone(),
            fold: 0,
            assessment_t: 150.0,
            label: 1,
            proba: if i % 2 == 0 { 0.9 } else { 0.1 },
        });
    }
    let fixture = dir.path().join("fixture.jsonl");
    save_cohort(&cohort, &fixture).unwrap();
    let preds_path = dir.path().join("preds.csv");
    std::fs::write(&preds_path, predictions_to_csv(&preds)).unwrap();
    let out = dir.path().join("surv");
    let r = simta(&[
        "survival",
        "--preds",
        p(&preds_path),
        "--cohort",
        p(&fixture),
        "--out",
        p(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report = json(&out.join("logrank.json"));
    for e in report["endpoints"].as_array().unwrap() {
        assert_eq!(e["statistic"], 0.0);
        assert_eq!(e["p_value"], 1.0);
    }

    // one group only: outputs are written, then the undefined test is reported
    for p in &mut preds {
        p.proba = 0.9;
    }
    std::fs::write(&preds_path, predictions_to_csv(&preds)).unwrap();
    let out = dir.path().join("one");
    let r = simta(&[
        "survival",
        "--preds",
        p(&preds_path),
        "--cohort",
        p(&fixture),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.status.code(), Some(4));
    assert!(json(&out.join("logrank.json"))["endpoints"][0]["error"].is_string());
}

#[test]
fn gradcheck_passes_and_negative_control_fails() {
    let r = simta(&["gradcheck"]);
    assert!(r.status.success());
    let text = String::from_utf8_lossy(&r.stdout);
    for name in ["simta_module", "simta_stack", "lstm_i", "fusion_simta"] {
        assert!(text.contains(name), "{text}");
    }
    assert!(text.contains("lambda_raw") && text.contains("beta"));
    let r = simta(&["gradcheck", "--module", "simta", "--inject-fault"]);
    assert_eq!(r.status.code(), Some(5));
}

#[test]
fn compare_suites_write_tables_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let syn = dir.path().join("syn");
    let r = simta(&[
        "compare",
        "--suite",
        "synthetic",
        "--seed",
        "1",
        "--count",
        "60",
        "--epochs",
        "2",
        "--out",
        p(&syn),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for c in ["simta", "lstm", "lstm_i", "lstm_s"] {
        assert_eq!(
            read(&syn.join(format!("curves/{c}.csv"))).lines().count(),
            3
        );
    }
    assert_eq!(read(&syn.join("table.csv")).lines().count(), 5);
    assert!(syn.join("table.md").exists() && syn.join("summary.json").exists());

    let coh = dir.path().join("coh");
    let r = simta(&[
        "compare",
        "--suite",
        "cohort",
        "--seed",
        "1",
        "--subjects",
        "30",
        "--epochs",
        "1",
        "--out",
        p(&coh),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = read(&coh.join("table.csv"));
    assert_eq!(table.lines().count(), 7, "{table}");
    assert!(table.contains("Ours w/o radiomics") && table.contains("LSTM(s)"));
    let manifests = std::fs::read_dir(&coh)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() == "manifest.json")
        .count();
    assert_eq!(manifests, 1);
}
