//! Series encoders that turn an asynchronous series into one summary vector.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lstm::{LstmCache, LstmParams, LstmVariant};
use crate::nn::Dense;
use crate::numerics::{Activation, Matrix, ParamSet, Rng};
use crate::simta::{AsyncSeries, SimTAStack, StackCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Simta,
    Lstm(LstmVariant),
}

impl EncoderKind {
    pub fn label(self) -> &'static str {
        match self {
            EncoderKind::Simta => "SimTA",
            EncoderKind::Lstm(v) => v.label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeriesEncoder {
    Simta(SimTAStack),
    /// Final hidden state, optionally projected to a fixed summary width.
    Lstm {
        lstm: LstmParams,
        proj: Option<Dense>,
    },
}

#[derive(Debug, Clone)]
pub enum EncoderCache {
    Simta(StackCache),
    Lstm { lstm: LstmCache, h_last: Vec<f64> },
}

impl SeriesEncoder {
    pub fn kind(&self) -> EncoderKind {
        match self {
            SeriesEncoder::Simta(_) => EncoderKind::Simta,
            SeriesEncoder::Lstm { lstm, .. } => EncoderKind::Lstm(lstm.variant),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            SeriesEncoder::Simta(s) => s.output_dim(),
            SeriesEncoder::Lstm { lstm, proj } => {
                proj.as_ref().map_or(lstm.hidden(), Dense::output_dim)
            }
        }
    }

    pub fn forward(&self, series: &AsyncSeries) -> Result<(Vec<f64>, EncoderCache)> {
        match self {
            SeriesEncoder::Simta(stack) => {
                let (s, c) = stack.forward(series)?;
                Ok((s, EncoderCache::Simta(c)))
            }
            SeriesEncoder::Lstm { lstm, proj } => {
                let (h, c) = lstm.forward(series)?;
                let out = match proj {
                    Some(p) => p.forward(&Matrix::row_vector(&h))?.into_data(),
                    None => h.clone(),
                };
                Ok((out, EncoderCache::Lstm { lstm: c, h_last: h }))
            }
        }
    }

    pub fn backward(
        &self,
        cache: &EncoderCache,
        d_summary: &[f64],
        grad: &mut SeriesEncoder,
    ) -> Result<()> {
        match (self, cache, grad) {
            (SeriesEncoder::Simta(stack), EncoderCache::Simta(c), SeriesEncoder::Simta(g)) => {
                stack.backward(c, d_summary, g)?;
            }
            (
                SeriesEncoder::Lstm { lstm, proj },
                EncoderCache::Lstm { lstm: c, h_last },
                SeriesEncoder::Lstm { lstm: gl, proj: gp },
            ) => {
                let d_h = match (proj, gp) {
                    (Some(p), Some(gp)) => p
                        .backward(
                            &Matrix::row_vector(h_last),
                            &Matrix::row_vector(d_summary),
                            gp,
                        )?
                        .into_data(),
                    _ => d_summary.to_vec(),
                };
                lstm.backward(c, &d_h, gl)?;
            }
            _ => panic!("encoder, cache and gradient kinds must match"),
        }
        Ok(())
    }
}

impl ParamSet for SeriesEncoder {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        match self {
            SeriesEncoder::Simta(s) => s.visit(&mut |n, g| f(&format!("simta.{n}"), g)),
            SeriesEncoder::Lstm { lstm, proj } => {
                lstm.visit(&mut |n, g| f(&format!("lstm.{n}"), g));
                if let Some(p) = proj {
                    p.visit(&mut |n, g| f(&format!("proj.{n}"), g));
                }
            }
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        match self {
            SeriesEncoder::Simta(s) => s.visit_mut(&mut |n, g| f(&format!("simta.{n}"), g)),
            SeriesEncoder::Lstm { lstm, proj } => {
                lstm.visit_mut(&mut |n, g| f(&format!("lstm.{n}"), g));
                if let Some(p) = proj {
                    p.visit_mut(&mut |n, g| f(&format!("proj.{n}"), g));
                }
            }
        }
    }
}

/// Number of parameters of a SimTA stack with the given widths.
pub fn simta_param_count(input_dim: usize, dims: &[usize]) -> usize {
    let mut c_in = input_dim;
    let mut n = 0;
    for &d in dims {
        n += c_in * d + d + 2;
        c_in = d;
    }
    n
}

/// Hidden size whose total parameter count (LSTM plus `extra(h)`) lands
/// closest to `budget`.
pub fn lstm_hidden_for_budget(
    budget: usize,
    value_dim: usize,
    variant: LstmVariant,
    extra: impl Fn(usize) -> usize,
) -> usize {
    (1..=512)
        .min_by_key(|&h| {
            let total = LstmParams::count_for(value_dim, h, variant) + extra(h);
            total.abs_diff(budget)
        })
        .expect("non-empty range")
}

/// Builds an encoder of `kind`. For LSTMs, `budget` (when given) picks the
/// hidden size by parameter parity and a projection to `summary_dim` is
/// added; without a budget the hidden size is `summary_dim` directly.
pub fn build_encoder(
    rng: &mut Rng,
    kind: EncoderKind,
    input_dim: usize,
    simta_dims: &[usize],
    activation: Activation,
    lstm_budget: Option<usize>,
) -> Result<SeriesEncoder> {
    let summary_dim = *simta_dims.last().unwrap_or(&1);
    match kind {
        EncoderKind::Simta => Ok(SeriesEncoder::Simta(SimTAStack::new(
            rng, input_dim, simta_dims, activation,
        )?)),
        EncoderKind::Lstm(variant) => match lstm_budget {
            Some(budget) => {
                let h = lstm_hidden_for_budget(budget, input_dim, variant, |h| {
                    h * summary_dim + summary_dim
                });
                Ok(SeriesEncoder::Lstm {
                    lstm: LstmParams::new(rng, input_dim, h, variant),
                    proj: Some(Dense::new(rng, h, summary_dim)),
                })
            }
            None => Ok(SeriesEncoder::Lstm {
                lstm: LstmParams::new(rng, input_dim, summary_dim, variant),
                proj: None,
            }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    #[test]
    fn simta_count_matches_params() {
        let mut rng = Rng::new(1);
        let s = SimTAStack::new(&mut rng, 5, &[7, 3], Activation::Tanh).unwrap();
        assert_eq!(s.num_params(), simta_param_count(5, &[7, 3]));
    }

    #[test]
    fn budgeted_lstm_is_within_twenty_percent() {
        let mut rng = Rng::new(2);
        for (input, dims) in [(107usize, vec![32usize]), (22, vec![32]), (1, vec![32, 32])] {
            let budget = simta_param_count(input, &dims);
            for v in [
                LstmVariant::Plain,
                LstmVariant::Interval,
                LstmVariant::Stamp,
            ] {
                let e = build_encoder(
                    &mut rng,
                    EncoderKind::Lstm(v),
                    input,
                    &dims,
                    Activation::Tanh,
                    Some(budget),
                )
                .unwrap();
                let ratio = e.num_params() as f64 / budget as f64;
                assert!(
                    (0.8..=1.2).contains(&ratio),
                    "{input} {dims:?} {v:?}: {ratio}"
                );
                assert_eq!(e.output_dim(), *dims.last().unwrap());
            }
        }
    }

    #[test]
    fn projected_lstm_gradients() {
        let mut rng = Rng::new(3);
        let enc = build_encoder(
            &mut rng,
            EncoderKind::Lstm(LstmVariant::Interval),
            3,
            &[4],
            Activation::Tanh,
            Some(60),
        )
        .unwrap();
        let x = Matrix::from_vec(4, 3, (0..12).map(|_| rng.normal()).collect()).unwrap();
        let series = AsyncSeries::new(x, vec![0.0, 0.5, 2.0, 2.25]).unwrap();
        let w: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let report = grad_check(
            |flat| {
                let mut e = enc.clone();
                e.load_flat(flat);
                let (s, c) = e.forward(&series).unwrap();
                let mut g = e.zeros_like();
                e.backward(&c, &w, &mut g).unwrap();
                (s.iter().zip(&w).map(|(a, b)| a * b).sum(), g.to_flat())
            },
            &enc.to_flat(),
            1e-5,
            1e-5,
        );
        assert!(report.passed, "{}", report.max_rel_err);
    }
}
