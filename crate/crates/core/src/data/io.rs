//! JSON-lines storage for cohorts and synthetic benchmarks.
//!
//! Floats are written in shortest round-trip form and read back exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::cohort::{Assessment, Cohort, Outcome, SubjectRecord};
use super::synth::BenchmarkEntry;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::output::atomic_write;
use crate::simta::AsyncSeries;

#[derive(Serialize, Deserialize)]
struct SeriesLine {
    t: Vec<f64>,
    x: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize, Default)]
struct InterventionLine {
    t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SubjectLine {
    id: String,
    fold: usize,
    #[serde(rename = "static")]
    static_features: Vec<f64>,
    #[serde(default)]
    modalities: BTreeMap<String, SeriesLine>,
    #[serde(default)]
    interventions: InterventionLine,
    assessments: Vec<Assessment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pfs: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    os: Option<Outcome>,
}

impl SubjectLine {
    fn from_record(s: &SubjectRecord, fold: usize) -> Self {
        let modalities = s
            .modalities
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    SeriesLine {
                        t: v.timestamps().to_vec(),
                        x: v.values().iter_rows().map(<[f64]>::to_vec).collect(),
                    },
                )
            })
            .collect();
        Self {
            id: s.id.clone(),
            fold,
            static_features: s.static_features.clone(),
            modalities,
            interventions: InterventionLine {
                t: s.interventions.clone(),
            },
            assessments: s.assessments.clone(),
            pfs: s.pfs,
            os: s.os,
        }
    }

    fn into_record(self, line: usize) -> Result<(SubjectRecord, usize)> {
        let mut modalities = BTreeMap::new();
        for (name, series) in self.modalities {
            if series.t.is_empty() {
                continue;
            }
            let values = Matrix::from_rows(&series.x).map_err(|e| Error::Parse {
                line,
                msg: format!("modality {name}: {e}"),
            })?;
            let s = AsyncSeries::new(values, series.t).map_err(|e| Error::Parse {
                line,
                msg: format!("modality {name}: {e}"),
            })?;
            modalities.insert(name, s);
        }
        Ok((
            SubjectRecord {
                id: self.id,
                static_features: self.static_features,
                modalities,
                interventions: self.interventions.t,
                assessments: self.assessments,
                pfs: self.pfs,
                os: self.os,
            },
            self.fold,
        ))
    }
}

fn parse_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        out.push((line, value));
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn cohort_to_jsonl(cohort: &Cohort) -> String {
    let mut out = String::new();
    for (s, &fold) in cohort.subjects.iter().zip(&cohort.folds) {
        out.push_str(
            &serde_json::to_string(&SubjectLine::from_record(s, fold)).expect("serializable"),
        );
        out.push('\n');
    }
    out
}

pub fn cohort_from_jsonl(text: &str) -> Result<Cohort> {
    let mut subjects = Vec::new();
    let mut folds = Vec::new();
    for (line, parsed) in parse_lines::<SubjectLine>(text)? {
        let (s, fold) = parsed.into_record(line)?;
        subjects.push(s);
        folds.push(fold);
    }
    if subjects.is_empty() {
        return Err(Error::Schema("cohort file has no subjects".into()));
    }
    Cohort::new(subjects, folds)
}

pub fn save_cohort(cohort: &Cohort, path: &Path) -> Result<()> {
    atomic_write(path, cohort_to_jsonl(cohort).as_bytes())
}

pub fn load_cohort(path: &Path) -> Result<Cohort> {
    cohort_from_jsonl(&read_text(path)?)
}

pub fn benchmark_to_jsonl(entries: &[BenchmarkEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn benchmark_from_jsonl(text: &str) -> Result<Vec<BenchmarkEntry>> {
    let entries: Vec<BenchmarkEntry> = parse_lines(text)?.into_iter().map(|(_, e)| e).collect();
    if entries.is_empty() {
        return Err(Error::Schema("benchmark file has no series".into()));
    }
    Ok(entries)
}

pub fn save_benchmark(entries: &[BenchmarkEntry], path: &Path) -> Result<()> {
    atomic_write(path, benchmark_to_jsonl(entries).as_bytes())
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkEntry>> {
    benchmark_from_jsonl(&read_text(path)?)
}
