//! Fully connected layers shared by the prediction heads and encoders.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{glorot, Activation, Matrix, ParamSet, Rng};

/// Affine map `y = x W + b` over row vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn new(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: glorot(rng, fan_in, fan_out),
            b: vec![0.0; fan_out],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(&self.w)?;
        y.add_row_broadcast(&self.b)?;
        Ok(y)
    }

    /// Returns the input gradient and accumulates parameter gradients into `grad`.
    pub fn backward(&self, x: &Matrix, dy: &Matrix, grad: &mut Dense) -> Result<Matrix> {
        grad.w.add_assign(&x.t_matmul(dy)?)?;
        for (g, s) in grad.b.iter_mut().zip(dy.col_sums()) {
            *g += s;
        }
        dy.matmul_t(&self.w)
    }
}

impl ParamSet for Dense {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("w", self.w.data());
        f("b", &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("w", self.w.data_mut());
        f("b", &mut self.b);
    }
}

/// Two-layer perceptron: `out_act(act(x W1 + b1) W2 + b2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: Dense,
    pub output: Dense,
    pub act: Activation,
    pub out_act: Activation,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    x: Matrix,
    z1: Matrix,
    h1: Matrix,
    z2: Matrix,
}

impl Mlp {
    pub fn new(
        rng: &mut Rng,
        input: usize,
        hidden: usize,
        output: usize,
        act: Activation,
        out_act: Activation,
    ) -> Self {
        Self {
            hidden: Dense::new(rng, input, hidden),
            output: Dense::new(rng, hidden, output),
            act,
            out_act,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output.output_dim()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        let z1 = self.hidden.forward(x)?;
        let h1 = self.act.forward(&z1);
        let z2 = self.output.forward(&h1)?;
        let y = self.out_act.forward(&z2);
        Ok((
            y,
            MlpCache {
                x: x.clone(),
                z1,
                h1,
                z2,
            },
        ))
    }

    pub fn backward(&self, cache: &MlpCache, dy: &Matrix, grad: &mut Mlp) -> Result<Matrix> {
        let dz2 = dy.hadamard(&self.out_act.backward(&cache.z2))?;
        let dh1 = self.output.backward(&cache.h1, &dz2, &mut grad.output)?;
        let dz1 = dh1.hadamard(&self.act.backward(&cache.z1))?;
        self.hidden.backward(&cache.x, &dz1, &mut grad.hidden)
    }
}

impl ParamSet for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        self.hidden.visit(&mut |n, g| f(&format!("hidden.{n}"), g));
        self.output.visit(&mut |n, g| f(&format!("output.{n}"), g));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.hidden
            .visit_mut(&mut |n, g| f(&format!("hidden.{n}"), g));
        self.output
            .visit_mut(&mut |n, g| f(&format!("output.{n}"), g));
    }
}
