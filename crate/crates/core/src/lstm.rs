//! Single-layer LSTM baselines.
//!
//! The three variants differ only in what each step sees: the raw values,
//! the values plus the gap since the previous step, or the values plus the
//! absolute timestamp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{glorot, sigmoid, Matrix, ParamSet, Rng};
use crate::simta::AsyncSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LstmVariant {
    /// `X_i`
    Plain,
    /// `X_i ⊕ τ_{i−1}`, with a zero gap before the first step
    Interval,
    /// `X_i ⊕ t_i`
    Stamp,
}

impl LstmVariant {
    pub fn extra_inputs(self) -> usize {
        match self {
            LstmVariant::Plain => 0,
            LstmVariant::Interval | LstmVariant::Stamp => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LstmVariant::Plain => "LSTM",
            LstmVariant::Interval => "LSTM(i)",
            LstmVariant::Stamp => "LSTM(s)",
        }
    }
}

/// Gate weights in `[input, forget, cell, output]` column blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub wx: Matrix,
    pub wh: Matrix,
    pub b: Vec<f64>,
    pub variant: LstmVariant,
    /// Rescale stamps to `(t − t₀) / (t_last − t₀)` before feeding them.
    #[serde(default)]
    pub normalize_stamps: bool,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    inputs: Matrix,
    // per step, 4H gate activations after their nonlinearity
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hiddens: Vec<Vec<f64>>,
}

impl LstmCache {
    /// Augmented per-step inputs actually fed to the cell.
    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    /// `(i, f, g, o)` activations at `step`.
    pub fn gates(&self, step: usize) -> (&[f64], &[f64], &[f64], &[f64]) {
        let h = self.gates[step].len() / 4;
        let g = &self.gates[step];
        (&g[..h], &g[h..2 * h], &g[2 * h..3 * h], &g[3 * h..])
    }
}

impl LstmParams {
    /// `value_dim` is the width of the series values (before augmentation).
    pub fn new(rng: &mut Rng, value_dim: usize, hidden: usize, variant: LstmVariant) -> Self {
        let c_in = value_dim + variant.extra_inputs();
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        Self {
            wx: glorot(rng, c_in, 4 * hidden),
            wh: glorot(rng, hidden, 4 * hidden),
            b,
            variant,
            normalize_stamps: false,
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.rows()
    }

    pub fn value_dim(&self) -> usize {
        self.wx.rows() - self.variant.extra_inputs()
    }

    /// Parameter count of an LSTM with the given shape, without building one.
    pub fn count_for(value_dim: usize, hidden: usize, variant: LstmVariant) -> usize {
        4 * hidden * (value_dim + variant.extra_inputs() + hidden + 1)
    }

    /// Per-step input rows for this variant.
    pub fn build_inputs(&self, series: &AsyncSeries) -> Result<Matrix> {
        if series.channels() != self.value_dim() {
            return Err(Error::dim(
                "lstm_forward",
                series.values().shape(),
                (series.len(), self.value_dim()),
            ));
        }
        let ts = series.timestamps();
        let extra: Option<Vec<f64>> = match self.variant {
            LstmVariant::Plain => None,
            LstmVariant::Interval => Some(std::iter::once(0.0).chain(series.intervals()).collect()),
            LstmVariant::Stamp => {
                if self.normalize_stamps {
                    let span = series.last_timestamp() - ts[0];
                    let span = if span > 0.0 { span } else { 1.0 };
                    Some(ts.iter().map(|t| (t - ts[0]) / span).collect())
                } else {
                    Some(ts.to_vec())
                }
            }
        };
        let Some(extra) = extra else {
            return Ok(series.values().clone());
        };
        let c = series.channels();
        let mut m = Matrix::zeros(series.len(), c + 1);
        for (i, e) in extra.iter().enumerate() {
            let row = m.row_mut(i);
            row[..c].copy_from_slice(series.values().row(i));
            row[c] = *e;
        }
        Ok(m)
    }

    /// Runs the recurrence and returns the final hidden state.
    pub fn forward(&self, series: &AsyncSeries) -> Result<(Vec<f64>, LstmCache)> {
        let inputs = self.build_inputs(series)?;
        Ok(self.forward_inputs(inputs))
    }

    fn forward_inputs(&self, inputs: Matrix) -> (Vec<f64>, LstmCache) {
        let h_dim = self.hidden();
        let steps = inputs.rows();
        let mut h = vec![0.0; h_dim];
        let mut c = vec![0.0; h_dim];
        let mut gates = Vec::with_capacity(steps);
        let mut cells = Vec::with_capacity(steps);
        let mut hiddens = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut z = self.b.clone();
            for (k, &x) in inputs.row(t).iter().enumerate() {
                if x != 0.0 {
                    for (zv, w) in z.iter_mut().zip(self.wx.row(k)) {
                        *zv += x * w;
                    }
                }
            }
            for (k, &hv) in h.iter().enumerate() {
                if hv != 0.0 {
                    for (zv, w) in z.iter_mut().zip(self.wh.row(k)) {
                        *zv += hv * w;
                    }
                }
            }
            for (idx, v) in z.iter_mut().enumerate() {
                *v = if (2 * h_dim..3 * h_dim).contains(&idx) {
                    v.tanh()
                } else {
                    sigmoid(*v)
                };
            }
            for j in 0..h_dim {
                let (ig, fg, gg, og) = (z[j], z[h_dim + j], z[2 * h_dim + j], z[3 * h_dim + j]);
                c[j] = fg * c[j] + ig * gg;
                h[j] = og * c[j].tanh();
            }
            gates.push(z);
            cells.push(c.clone());
            hiddens.push(h.clone());
        }
        (
            h,
            LstmCache {
                inputs,
                gates,
                cells,
                hiddens,
            },
        )
    }

    /// Backpropagation through time from a gradient on the final hidden
    /// state. Accumulates into `grad` and returns the gradient w.r.t. the
    /// augmented inputs (T × C').
    pub fn backward(
        &self,
        cache: &LstmCache,
        d_h_last: &[f64],
        grad: &mut LstmParams,
    ) -> Result<Matrix> {
        let h_dim = self.hidden();
        if d_h_last.len() != h_dim {
            return Err(Error::dim("lstm_backward", (1, d_h_last.len()), (1, h_dim)));
        }
        let steps = cache.inputs.rows();
        let c_in = cache.inputs.cols();
        let mut dx = Matrix::zeros(steps, c_in);
        let mut dh = d_h_last.to_vec();
        let mut dc = vec![0.0; h_dim];
        let mut dz = vec![0.0; 4 * h_dim];
        let zeros = vec![0.0; h_dim];
        for t in (0..steps).rev() {
            let g = &cache.gates[t];
            let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &cache.hiddens[t - 1] } else { &zeros };
            for j in 0..h_dim {
                let (ig, fg, gg, og) = (g[j], g[h_dim + j], g[2 * h_dim + j], g[3 * h_dim + j]);
                let tc = cache.cells[t][j].tanh();
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * og * (1.0 - tc * tc);
                let d_i = dc[j] * gg;
                let d_g = dc[j] * ig;
                let d_f = dc[j] * c_prev[j];
                dz[j] = d_i * ig * (1.0 - ig);
                dz[h_dim + j] = d_f * fg * (1.0 - fg);
                dz[2 * h_dim + j] = d_g * (1.0 - gg * gg);
                dz[3 * h_dim + j] = d_o * og * (1.0 - og);
                dc[j] *= fg;
            }
            for (gb, d) in grad.b.iter_mut().zip(&dz) {
                *gb += d;
            }
            let x = cache.inputs.row(t);
            for (k, &xv) in x.iter().enumerate() {
                let row = grad.wx.row_mut(k);
                for (w, d) in row.iter_mut().zip(&dz) {
                    *w += xv * d;
                }
            }
            for (k, &hv) in h_prev.iter().enumerate() {
                let row = grad.wh.row_mut(k);
                for (w, d) in row.iter_mut().zip(&dz) {
                    *w += hv * d;
                }
            }
            for k in 0..c_in {
                dx[(t, k)] = crate::numerics::dot(self.wx.row(k), &dz);
            }
            for k in 0..h_dim {
                dh[k] = crate::numerics::dot(self.wh.row(k), &dz);
            }
        }
        Ok(dx)
    }
}

impl ParamSet for LstmParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("wx", self.wx.data());
        f("wh", self.wh.data());
        f("b", &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("wx", self.wx.data_mut());
        f("wh", self.wh.data_mut());
        f("b", &mut self.b);
    }
}

pub fn lstm_forward(series: &AsyncSeries, params: &LstmParams) -> Result<(Vec<f64>, LstmCache)> {
    params.forward(series)
}

pub fn lstm_backward(
    params: &LstmParams,
    cache: &LstmCache,
    upstream: &[f64],
) -> Result<(Matrix, LstmParams)> {
    let mut grad = params.zeros_like();
    let dx = params.backward(cache, upstream, &mut grad)?;
    Ok((dx, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    fn random_series(rng: &mut Rng, t: usize, c: usize) -> AsyncSeries {
        let mut ts = vec![rng.uniform(0.0, 3.0)];
        for _ in 1..t {
            let last = *ts.last().unwrap();
            ts.push(last + rng.uniform(0.1, 2.0));
        }
        let x = Matrix::from_vec(t, c, (0..t * c).map(|_| rng.normal()).collect()).unwrap();
        AsyncSeries::new(x, ts).unwrap()
    }

    #[test]
    fn zero_weights_zero_inputs() {
        let mut rng = Rng::new(1);
        let mut p = LstmParams::new(&mut rng, 2, 3, LstmVariant::Plain);
        p.fill(0.0);
        let s = AsyncSeries::new(Matrix::zeros(4, 2), vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let (h, _) = lstm_forward(&s, &p).unwrap();
        assert_eq!(h, vec![0.0; 3]);
    }

    #[test]
    fn interval_variant_pads_first_gap_with_zero() {
        let mut rng = Rng::new(2);
        let plain = LstmParams::new(&mut rng, 2, 3, LstmVariant::Plain);
        let mut interval = LstmParams::new(&mut rng, 2, 3, LstmVariant::Interval);
        // share the value weights; the extra row only ever multiplies 0.0
        for k in 0..2 {
            interval.wx.row_mut(k).copy_from_slice(plain.wx.row(k));
        }
        interval.wh = plain.wh.clone();
        interval.b = plain.b.clone();
        let s = random_series(&mut rng, 1, 2);
        let inputs = interval.build_inputs(&s).unwrap();
        assert_eq!(inputs.row(0)[2], 0.0);
        assert_eq!(
            lstm_forward(&s, &plain).unwrap().0,
            lstm_forward(&s, &interval).unwrap().0
        );
    }

    #[test]
    fn matches_hand_unrolled_scalar_reference() {
        let mut rng = Rng::new(3);
        let p = LstmParams::new(&mut rng, 1, 2, LstmVariant::Plain);
        let s = AsyncSeries::new(
            Matrix::from_vec(2, 1, vec![0.7, -1.3]).unwrap(),
            vec![0.0, 1.0],
        )
        .unwrap();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let (mut h, mut c) = ([0.0f64; 2], [0.0f64; 2]);
        for &x in &[0.7, -1.3] {
            let mut z = [0.0f64; 8];
            for k in 0..8 {
                z[k] = p.b[k] + x * p.wx[(0, k)] + h[0] * p.wh[(0, k)] + h[1] * p.wh[(1, k)];
            }
            let mut nh = [0.0; 2];
            for j in 0..2 {
                let i = sig(z[j]);
                let f = sig(z[2 + j]);
                let g = z[4 + j].tanh();
                let o = sig(z[6 + j]);
                c[j] = f * c[j] + i * g;
                nh[j] = o * c[j].tanh();
            }
            h = nh;
        }
        let (out, _) = lstm_forward(&s, &p).unwrap();
        for j in 0..2 {
            assert!((out[j] - h[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn all_variants_pass_grad_check() {
        for variant in [
            LstmVariant::Plain,
            LstmVariant::Interval,
            LstmVariant::Stamp,
        ] {
            let mut rng = Rng::new(4);
            let p = LstmParams::new(&mut rng, 3, 4, variant);
            let s = random_series(&mut rng, 5, 3);
            let w: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let report = grad_check(
                |flat| {
                    let mut q = p.clone();
                    q.load_flat(flat);
                    let (h, cache) = lstm_forward(&s, &q).unwrap();
                    let loss: f64 = h.iter().zip(&w).map(|(a, b)| a * b).sum();
                    let (_, g) = lstm_backward(&q, &cache, &w).unwrap();
                    (loss, g.to_flat())
                },
                &p.to_flat(),
                1e-5,
                1e-5,
            );
            assert!(report.passed, "{variant:?}: {}", report.max_rel_err);
        }
    }

    #[test]
    fn input_gradient_matches_finite_difference() {
        let mut rng = Rng::new(5);
        let p = LstmParams::new(&mut rng, 2, 3, LstmVariant::Plain);
        let s = random_series(&mut rng, 4, 2);
        let w: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let ts = s.timestamps().to_vec();
        let report = grad_check(
            |flat| {
                let series =
                    AsyncSeries::new(Matrix::from_vec(4, 2, flat.to_vec()).unwrap(), ts.clone())
                        .unwrap();
                let (h, cache) = lstm_forward(&series, &p).unwrap();
                let (dx, _) = lstm_backward(&p, &cache, &w).unwrap();
                (h.iter().zip(&w).map(|(a, b)| a * b).sum(), dx.into_data())
            },
            s.values().data(),
            1e-5,
            1e-5,
        );
        assert!(report.passed, "{}", report.max_rel_err);
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let mut rng = Rng::new(6);
        let p = LstmParams::new(&mut rng, 2, 3, LstmVariant::Stamp);
        let s = random_series(&mut rng, 4, 2);
        let (_, cache) = lstm_forward(&s, &p).unwrap();
        let (dx, g) = lstm_backward(&p, &cache, &[0.0; 3]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn long_sequence_gradient_is_finite() {
        let mut rng = Rng::new(7);
        let p = LstmParams::new(&mut rng, 2, 8, LstmVariant::Interval);
        let s = random_series(&mut rng, 50, 2);
        let (_, cache) = lstm_forward(&s, &p).unwrap();
        let (dx, g) = lstm_backward(&p, &cache, &[1.0; 8]).unwrap();
        assert!(dx.row(0).iter().all(|v| v.is_finite()));
        assert!(g.to_flat().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = Rng::new(8);
        let p = LstmParams::new(&mut rng, 2, 3, LstmVariant::Plain);
        assert_eq!(&p.b[3..6], &[1.0, 1.0, 1.0]);
        assert_eq!(&p.b[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(
            p.num_params(),
            LstmParams::count_for(2, 3, LstmVariant::Plain)
        );
    }

    #[test]
    fn gates_stay_in_range() {
        let mut rng = Rng::new(9);
        let p = LstmParams::new(&mut rng, 3, 5, LstmVariant::Stamp);
        let s = random_series(&mut rng, 12, 3);
        let (_, cache) = lstm_forward(&s, &p).unwrap();
        for t in 0..12 {
            let (i, f, g, o) = cache.gates(t);
            for v in i.iter().chain(f).chain(o) {
                assert!(*v > 0.0 && *v < 1.0);
            }
            for v in g {
                assert!(*v > -1.0 && *v < 1.0);
            }
        }
    }

    #[test]
    fn plain_ignores_time_stamp_does_not() {
        let mut rng = Rng::new(10);
        let plain = LstmParams::new(&mut rng, 2, 3, LstmVariant::Plain);
        let stamp = LstmParams::new(&mut rng, 2, 3, LstmVariant::Stamp);
        let s = random_series(&mut rng, 6, 2);
        let moved = AsyncSeries::new(
            s.values().clone(),
            s.timestamps().iter().map(|t| 3.0 * t + 11.0).collect(),
        )
        .unwrap();
        assert_eq!(
            lstm_forward(&s, &plain).unwrap().0,
            lstm_forward(&moved, &plain).unwrap().0
        );
        assert_ne!(
            lstm_forward(&s, &stamp).unwrap().0,
            lstm_forward(&moved, &stamp).unwrap().0
        );
    }
}
