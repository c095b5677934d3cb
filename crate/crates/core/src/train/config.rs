use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderKind;
use crate::error::{Error, Result};
use crate::fusion::Ablation;
use crate::lstm::LstmVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Simta,
    Lstm,
    LstmI,
    LstmS,
    Fusion,
}

impl ModelKind {
    /// The four sequence models of the synthetic benchmark.
    pub const SEQUENCE: [ModelKind; 4] = [
        ModelKind::Simta,
        ModelKind::Lstm,
        ModelKind::LstmI,
        ModelKind::LstmS,
    ];

    /// Series encoder used by this kind. `Fusion` uses SimTA encoders.
    pub fn encoder_kind(self) -> EncoderKind {
        match self {
            ModelKind::Simta | ModelKind::Fusion => EncoderKind::Simta,
            ModelKind::Lstm => EncoderKind::Lstm(LstmVariant::Plain),
            ModelKind::LstmI => EncoderKind::Lstm(LstmVariant::Interval),
            ModelKind::LstmS => EncoderKind::Lstm(LstmVariant::Stamp),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Fusion => "Ours",
            k => k.encoder_kind().label(),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Simta => "simta",
            ModelKind::Lstm => "lstm",
            ModelKind::LstmI => "lstm_i",
            ModelKind::LstmS => "lstm_s",
            ModelKind::Fusion => "fusion",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simta" => Ok(ModelKind::Simta),
            "lstm" => Ok(ModelKind::Lstm),
            "lstm_i" => Ok(ModelKind::LstmI),
            "lstm_s" => Ok(ModelKind::LstmS),
            "fusion" => Ok(ModelKind::Fusion),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Bce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub ablate: Vec<Ablation>,
    /// Largest sampling interval `I` for synthetic instances.
    pub max_interval: f64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 1,
            lr: 1e-3,
            seed: 0,
            model: ModelKind::Simta,
            ablate: Vec::new(),
            max_interval: 2.0,
            loss: LossKind::Mse,
        }
    }
}

impl TrainConfig {
    pub fn synthetic(model: ModelKind, seed: u64) -> Self {
        Self {
            model,
            seed,
            ..Self::default()
        }
    }

    pub fn cohort(model: ModelKind, seed: u64) -> Self {
        Self {
            model,
            seed,
            loss: LossKind::Bce,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.max_interval > 0.0 && self.max_interval.is_finite()) {
            return Err(Error::Config(format!(
                "interval I must be positive, got {}",
                self.max_interval
            )));
        }
        Ok(())
    }
}
