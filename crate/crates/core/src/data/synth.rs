//! Sum-of-sinusoids benchmark with irregular sampling.
//!
//! A series is `X_t = Σ_j [α_j sin(ω_j π t + b_j) + β_j] + η ε` with fresh
//! standard-normal `ε` at every evaluation. Each instance samples ten points
//! with gaps drawn from `U(ε_min, I)` and asks for the values one, two and
//! three time units after the last point.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

pub const INPUT_POINTS: usize = 10;
pub const TARGET_OFFSETS: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigComponent {
    pub alpha: f64,
    pub omega: f64,
    pub phase: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigSeriesSpec {
    pub components: Vec<TrigComponent>,
    pub eta: f64,
}

impl TrigSeriesSpec {
    pub fn new(components: Vec<TrigComponent>, eta: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config(
                "a series needs at least one component".into(),
            ));
        }
        if !(eta >= 0.0) {
            return Err(Error::Config(format!(
                "noise level must be >= 0, got {eta}"
            )));
        }
        Ok(Self { components, eta })
    }

    /// Noise-free value at `t`.
    pub fn clean(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.alpha * (c.omega * PI * t + c.phase).sin() + c.offset)
            .sum()
    }

    /// Value at `t` with a fresh noise draw.
    pub fn eval(&self, t: f64, rng: &mut Rng) -> f64 {
        let clean = self.clean(t);
        if self.eta == 0.0 {
            clean
        } else {
            clean + self.eta * rng.normal()
        }
    }

    pub fn mean_level(&self) -> f64 {
        self.components.iter().map(|c| c.offset).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_components: usize,
    pub eta: f64,
    pub count: usize,
    pub alpha_range: (f64, f64),
    pub omega_range: (f64, f64),
    pub phase_range: (f64, f64),
    pub offset_range: (f64, f64),
    pub train_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_components: 10,
            eta: 0.5,
            count: 10_000,
            alpha_range: (0.5, 2.0),
            omega_range: (0.01, 0.2),
            phase_range: (0.0, 2.0 * PI),
            offset_range: (-0.5, 0.5),
            train_fraction: 0.8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("count must be >= 1".into()));
        }
        if self.n_components == 0 {
            return Err(Error::Config(
                "need at least one trigonometric component".into(),
            ));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::Config("eta must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(Error::Config("train fraction must lie in [0, 1]".into()));
        }
        for (name, (lo, hi)) in [
            ("alpha", self.alpha_range),
            ("omega", self.omega_range),
            ("phase", self.phase_range),
            ("offset", self.offset_range),
        ] {
            if !(lo <= hi) {
                return Err(Error::Config(format!(
                    "{name} range is empty: ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Instance-sampling parameters shared by training and validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub max_interval: f64,
    pub min_interval: f64,
    pub start_range: (f64, f64),
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            max_interval: 2.0,
            min_interval: 1e-3,
            start_range: (0.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub spec: TrigSeriesSpec,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledInstance {
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
    pub target_times: Vec<f64>,
    pub targets: Vec<f64>,
}

/// Draws `config.count` series. Series `i` uses its own stream derived from
/// one draw of `rng`, so the result does not depend on evaluation order. The
/// first `round(count · train_fraction)` series form the training split.
pub fn gen_trig_series(rng: &mut Rng, config: &SynthConfig) -> Result<Vec<BenchmarkEntry>> {
    config.validate()?;
    let base = rng.next_u64();
    let n_train = (config.count as f64 * config.train_fraction).round() as usize;
    Ok((0..config.count)
        .map(|i| {
            let mut r = Rng::derive(base, i as u64);
            let components = (0..config.n_components)
                .map(|_| TrigComponent {
                    alpha: r.uniform(config.alpha_range.0, config.alpha_range.1),
                    omega: r.uniform(config.omega_range.0, config.omega_range.1),
                    phase: r.uniform(config.phase_range.0, config.phase_range.1),
                    offset: r.uniform(config.offset_range.0, config.offset_range.1),
                })
                .collect();
            BenchmarkEntry {
                spec: TrigSeriesSpec {
                    components,
                    eta: config.eta,
                },
                split: if i < n_train {
                    Split::Train
                } else {
                    Split::Val
                },
            }
        })
        .collect())
}

/// Samples ten irregular points and the three targets that follow them.
pub fn sample_instance(
    spec: &TrigSeriesSpec,
    rng: &mut Rng,
    sampling: &SamplingConfig,
) -> Result<SampledInstance> {
    let max = sampling.max_interval;
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::Config(format!(
            "maximum interval must be positive, got {max}"
        )));
    }
    let min = sampling.min_interval.min(max);
    let mut t = rng.uniform(sampling.start_range.0, sampling.start_range.1);
    let mut timestamps = Vec::with_capacity(INPUT_POINTS);
    timestamps.push(t);
    for _ in 1..INPUT_POINTS {
        t += rng.uniform(min, max);
        timestamps.push(t);
    }
    let values = timestamps.iter().map(|&t| spec.eval(t, rng)).collect();
    let target_times: Vec<f64> = TARGET_OFFSETS.iter().map(|o| t + o).collect();
    let targets = target_times.iter().map(|&t| spec.eval(t, rng)).collect();
    Ok(SampledInstance {
        timestamps,
        values,
        target_times,
        targets,
    })
}
