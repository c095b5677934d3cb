//! Next-three-points regression on the trigonometric benchmark.

use serde::{Deserialize, Serialize};

use super::config::{LossKind, ModelKind, TrainConfig};
use super::metrics::MetricLog;
use crate::data::{
    sample_instance, BenchmarkEntry, SampledInstance, SamplingConfig, Split, TARGET_OFFSETS,
};
use crate::encoder::{
    build_encoder, lstm_hidden_for_budget, simta_param_count, EncoderKind, SeriesEncoder,
};
use crate::error::{Error, Result};
use crate::lstm::LstmParams;
use crate::nn::Mlp;
use crate::numerics::{adam_step, mse_loss, Activation, AdamState, Matrix, ParamSet, Rng};
use crate::simta::AsyncSeries;

const VAL_STREAM: u64 = 1 << 40;
const EPOCH_STREAM: u64 = 1 << 41;
const MODEL_STREAM: u64 = 1 << 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqModelConfig {
    pub simta_dims: Vec<usize>,
    pub head_hidden: usize,
    pub activation: Activation,
}

impl Default for SeqModelConfig {
    fn default() -> Self {
        Self {
            simta_dims: vec![32, 32],
            head_hidden: 32,
            activation: Activation::Tanh,
        }
    }
}

fn mlp_count(input: usize, hidden: usize, output: usize) -> usize {
    input * hidden + hidden + hidden * output + output
}

/// Series encoder followed by a two-layer head with one output per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqRegressor {
    pub encoder: SeriesEncoder,
    pub head: Mlp,
}

impl SeqRegressor {
    /// LSTM hidden sizes are chosen so the whole model has about as many
    /// parameters as the SimTA model with the same config.
    pub fn new(rng: &mut Rng, kind: EncoderKind, cfg: &SeqModelConfig) -> Result<Self> {
        let n_out = TARGET_OFFSETS.len();
        let encoder = match kind {
            EncoderKind::Simta => {
                build_encoder(rng, kind, 1, &cfg.simta_dims, cfg.activation, None)?
            }
            EncoderKind::Lstm(variant) => {
                let d = *cfg
                    .simta_dims
                    .last()
                    .ok_or_else(|| Error::Config("simta_dims is empty".into()))?;
                let budget =
                    simta_param_count(1, &cfg.simta_dims) + mlp_count(d, cfg.head_hidden, n_out);
                let h = lstm_hidden_for_budget(budget, 1, variant, |h| {
                    mlp_count(h, cfg.head_hidden, n_out)
                });
                SeriesEncoder::Lstm {
                    lstm: LstmParams::new(rng, 1, h, variant),
                    proj: None,
                }
            }
        };
        let head = Mlp::new(
            rng,
            encoder.output_dim(),
            cfg.head_hidden,
            n_out,
            cfg.activation,
            Activation::Identity,
        );
        Ok(Self { encoder, head })
    }

    pub fn instance_series(inst: &SampledInstance) -> Result<AsyncSeries> {
        AsyncSeries::new(
            Matrix::from_vec(inst.values.len(), 1, inst.values.clone())?,
            inst.timestamps.clone(),
        )
    }

    pub fn predict(&self, series: &AsyncSeries) -> Result<Vec<f64>> {
        let (s, _) = self.encoder.forward(series)?;
        Ok(self.head.forward(&Matrix::row_vector(&s))?.0.into_data())
    }

    pub fn loss(&self, inst: &SampledInstance) -> Result<f64> {
        let pred = self.predict(&Self::instance_series(inst)?)?;
        Ok(mse_loss(
            &Matrix::row_vector(&pred),
            &Matrix::row_vector(&inst.targets),
        )?
        .0)
    }

    pub fn loss_and_grad(&self, inst: &SampledInstance, grad: &mut SeqRegressor) -> Result<f64> {
        let (s, enc_cache) = self.encoder.forward(&Self::instance_series(inst)?)?;
        let (pred, head_cache) = self.head.forward(&Matrix::row_vector(&s))?;
        let (loss, d_pred) = mse_loss(&pred, &Matrix::row_vector(&inst.targets))?;
        let d_s = self.head.backward(&head_cache, &d_pred, &mut grad.head)?;
        self.encoder
            .backward(&enc_cache, d_s.data(), &mut grad.encoder)?;
        Ok(loss)
    }
}

impl ParamSet for SeqRegressor {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        self.encoder
            .visit(&mut |n, g| f(&format!("encoder.{n}"), g));
        self.head.visit(&mut |n, g| f(&format!("head.{n}"), g));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.encoder
            .visit_mut(&mut |n, g| f(&format!("encoder.{n}"), g));
        self.head.visit_mut(&mut |n, g| f(&format!("head.{n}"), g));
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticRun {
    pub kind: ModelKind,
    pub model: SeqRegressor,
    pub log: MetricLog,
}

fn sampling(cfg: &TrainConfig) -> SamplingConfig {
    SamplingConfig {
        max_interval: cfg.max_interval,
        ..SamplingConfig::default()
    }
}

/// Validation instances, one per validation series, fixed by `seed`.
pub fn validation_instances(
    entries: &[BenchmarkEntry],
    seed: u64,
    sampling: &SamplingConfig,
) -> Result<Vec<SampledInstance>> {
    entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.split == Split::Val)
        .map(|(i, e)| {
            sample_instance(
                &e.spec,
                &mut Rng::derive(seed, VAL_STREAM + i as u64),
                sampling,
            )
        })
        .collect()
}

pub fn train_synthetic(entries: &[BenchmarkEntry], cfg: &TrainConfig) -> Result<SyntheticRun> {
    train_synthetic_with(entries, cfg, &SeqModelConfig::default())
}

/// Trains one sequence model. Training instances are redrawn every epoch;
/// validation instances stay fixed.
pub fn train_synthetic_with(
    entries: &[BenchmarkEntry],
    cfg: &TrainConfig,
    model_cfg: &SeqModelConfig,
) -> Result<SyntheticRun> {
    cfg.validate()?;
    if cfg.model == ModelKind::Fusion {
        return Err(Error::Config(
            "the fusion model needs a cohort, not a series benchmark".into(),
        ));
    }
    if cfg.loss != LossKind::Mse {
        return Err(Error::Config(
            "the series benchmark is trained with mse loss".into(),
        ));
    }
    let train: Vec<usize> = (0..entries.len())
        .filter(|&i| entries[i].split == Split::Train)
        .collect();
    if train.is_empty() {
        return Err(Error::Data("benchmark has no training series".into()));
    }
    let sampling = sampling(cfg);
    let val = validation_instances(entries, cfg.seed, &sampling)?;
    if val.is_empty() {
        return Err(Error::Data("benchmark has no validation series".into()));
    }

    let mut model = SeqRegressor::new(
        &mut Rng::derive(cfg.seed, MODEL_STREAM),
        cfg.model.encoder_kind(),
        model_cfg,
    )?;
    let mut flat = model.to_flat();
    let mut adam = AdamState::new(flat.len(), cfg.lr);
    let mut grad = model.zeros_like();
    let mut log = MetricLog::default();

    for epoch in 0..cfg.epochs {
        let mut rng = Rng::derive(cfg.seed, EPOCH_STREAM + epoch as u64);
        let mut order = train.clone();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let inst = sample_instance(&entries[i].spec, &mut rng, &sampling)?;
                total += model.loss_and_grad(&inst, &mut grad)?;
            }
            grad.scale_all(1.0 / batch.len() as f64);
            adam_step(&mut flat, &grad.to_flat(), &mut adam)?;
            model.load_flat(&flat);
        }
        let train_loss = total / train.len() as f64;
        let val_loss = val
            .iter()
            .map(|inst| model.loss(inst))
            .sum::<Result<f64>>()?
            / val.len() as f64;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Numeric {
                index: epoch,
                value: if train_loss.is_finite() {
                    val_loss
                } else {
                    train_loss
                },
            });
        }
        log.push(train_loss, val_loss);
    }
    Ok(SyntheticRun {
        kind: cfg.model,
        model,
        log,
    })
}
