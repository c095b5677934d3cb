use serde::{Deserialize, Serialize};

use super::attention::elapsed_matrix;
use super::layer::{SimTACache, SimTAModuleParams};
use super::series::AsyncSeries;
use crate::error::{Error, Result};
use crate::numerics::{Activation, Matrix, ParamSet, Rng};

/// One or more attention modules applied in sequence over the same intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTAStack {
    pub modules: Vec<SimTAModuleParams>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct StackCache {
    steps: usize,
    out_dim: usize,
    modules: Vec<SimTACache>,
}

impl SimTAStack {
    /// `dims` lists the output width of each module in order.
    pub fn new(
        rng: &mut Rng,
        input_dim: usize,
        dims: &[usize],
        activation: Activation,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("a stack needs at least one module".into()));
        }
        let mut modules = Vec::with_capacity(dims.len());
        let mut c_in = input_dim;
        for &d in dims {
            modules.push(SimTAModuleParams::new(rng, c_in, d));
            c_in = d;
        }
        Ok(Self {
            modules,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.modules[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.modules.last().expect("non-empty").output_dim()
    }

    /// Full per-step output of the last module.
    pub fn forward_all(&self, series: &AsyncSeries) -> Result<(Matrix, StackCache)> {
        if series.channels() != self.input_dim() {
            return Err(Error::dim(
                "stack_forward",
                series.values().shape(),
                (series.len(), self.input_dim()),
            ));
        }
        let gap = elapsed_matrix(&series.intervals())?;
        let mut h = series.values().clone();
        let mut caches = Vec::with_capacity(self.modules.len());
        for m in &self.modules {
            let (y, cache) = m.forward_with_gap(&h, &gap, self.activation)?;
            caches.push(cache);
            h = y;
        }
        Ok((
            h,
            StackCache {
                steps: series.len(),
                out_dim: self.output_dim(),
                modules: caches,
            },
        ))
    }

    /// Summary vector: the last step's row of the final module output.
    pub fn forward(&self, series: &AsyncSeries) -> Result<(Vec<f64>, StackCache)> {
        let (out, cache) = self.forward_all(series)?;
        Ok((out.row(out.rows() - 1).to_vec(), cache))
    }

    /// Backward from a gradient on the per-step output.
    pub fn backward_all(
        &self,
        cache: &StackCache,
        d_out: &Matrix,
        grad: &mut SimTAStack,
    ) -> Result<Matrix> {
        let mut d = d_out.clone();
        for (k, m) in self.modules.iter().enumerate().rev() {
            d = m.backward(&cache.modules[k], &d, &mut grad.modules[k])?;
        }
        Ok(d)
    }

    /// Backward from a gradient on the summary vector. Returns the gradient
    /// w.r.t. the series values.
    pub fn backward(
        &self,
        cache: &StackCache,
        d_summary: &[f64],
        grad: &mut SimTAStack,
    ) -> Result<Matrix> {
        if d_summary.len() != cache.out_dim {
            return Err(Error::dim(
                "stack_backward",
                (1, d_summary.len()),
                (1, cache.out_dim),
            ));
        }
        let mut d_out = Matrix::zeros(cache.steps, cache.out_dim);
        d_out.row_mut(cache.steps - 1).copy_from_slice(d_summary);
        self.backward_all(cache, &d_out, grad)
    }
}

impl ParamSet for SimTAStack {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (k, m) in self.modules.iter().enumerate() {
            m.visit(&mut |n, g| f(&format!("module{k}.{n}"), g));
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (k, m) in self.modules.iter_mut().enumerate() {
            m.visit_mut(&mut |n, g| f(&format!("module{k}.{n}"), g));
        }
    }
}

/// Summary vector of `series` under `stack`.
pub fn stack_forward(series: &AsyncSeries, stack: &SimTAStack) -> Result<Vec<f64>> {
    stack.forward(series).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;
    use crate::simta::simta_forward;

    fn random_series(rng: &mut Rng, t: usize, c: usize) -> AsyncSeries {
        let mut ts = vec![rng.uniform(0.0, 5.0)];
        for _ in 1..t {
            let last = *ts.last().unwrap();
            ts.push(last + rng.uniform(0.1, 2.0));
        }
        let x = Matrix::from_vec(t, c, (0..t * c).map(|_| rng.normal()).collect()).unwrap();
        AsyncSeries::new(x, ts).unwrap()
    }

    #[test]
    fn single_module_single_step() {
        let mut rng = Rng::new(1);
        let stack = SimTAStack::new(&mut rng, 3, &[4], Activation::Tanh).unwrap();
        let s = random_series(&mut rng, 1, 3);
        let summary = stack_forward(&s, &stack).unwrap();
        let direct =
            Activation::Tanh.forward(&stack.modules[0].linear.forward(s.values()).unwrap());
        assert_eq!(summary, direct.row(0));
    }

    #[test]
    fn two_modules_equal_manual_composition() {
        let mut rng = Rng::new(2);
        let stack = SimTAStack::new(&mut rng, 3, &[5, 4], Activation::Tanh).unwrap();
        let s = random_series(&mut rng, 7, 3);
        let tau = s.intervals();
        let (h1, _) = simta_forward(s.values(), &tau, &stack.modules[0], Activation::Tanh).unwrap();
        let (h2, _) = simta_forward(&h1, &tau, &stack.modules[1], Activation::Tanh).unwrap();
        let summary = stack_forward(&s, &stack).unwrap();
        for (a, b) in summary.iter().zip(h2.row(6)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn translation_leaves_summary_bit_identical() {
        let mut rng = Rng::new(3);
        let stack = SimTAStack::new(&mut rng, 2, &[3, 3], Activation::Tanh).unwrap();
        // dyadic timestamps keep the shifted intervals exact
        let ts = vec![0.0, 0.5, 1.25, 3.0, 3.125];
        let x = Matrix::from_vec(5, 2, (0..10).map(|_| rng.normal()).collect()).unwrap();
        let s = AsyncSeries::new(x, ts).unwrap();
        let a = stack_forward(&s, &stack).unwrap();
        let b = stack_forward(&s.shifted(100.0).unwrap(), &stack).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn stack_gradients_pass_check() {
        let mut rng = Rng::new(4);
        let mut stack = SimTAStack::new(&mut rng, 3, &[4, 3], Activation::Tanh).unwrap();
        stack.modules[0].lambda_raw = -0.4;
        stack.modules[1].beta = 0.3;
        let s = random_series(&mut rng, 6, 3);
        let w: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let report = grad_check(
            |flat| {
                let mut q = stack.clone();
                q.load_flat(flat);
                let (summary, cache) = q.forward(&s).unwrap();
                let loss: f64 = summary.iter().zip(&w).map(|(a, b)| a * b).sum();
                let mut g = q.zeros_like();
                q.backward(&cache, &w, &mut g).unwrap();
                (loss, g.to_flat())
            },
            &stack.to_flat(),
            1e-5,
            1e-5,
        );
        assert!(report.passed, "{}", report.max_rel_err);
    }

    #[test]
    fn rejects_empty_stack_and_wrong_channels() {
        let mut rng = Rng::new(5);
        assert!(SimTAStack::new(&mut rng, 3, &[], Activation::Tanh).is_err());
        let stack = SimTAStack::new(&mut rng, 3, &[2], Activation::Tanh).unwrap();
        let s = random_series(&mut rng, 3, 2);
        assert!(stack_forward(&s, &stack).is_err());
    }
}
