use serde::{Deserialize, Serialize};

use super::attention::{elapsed_matrix, scores_from_gap};
use crate::error::{Error, Result};
use crate::nn::Dense;
use crate::numerics::{
    sigmoid, softmax_rows, softmax_rows_backward, softplus, Activation, Matrix, ParamSet, Rng,
};

/// Trainable state of one attention module: the time-decay pair and the
/// per-step linear map `f`.
///
/// The decay is stored unconstrained; the effective rate is
/// `softplus(lambda_raw)`, which is always positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTAModuleParams {
    pub lambda_raw: f64,
    pub beta: f64,
    pub linear: Dense,
}

/// Intermediates kept by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct SimTACache {
    x: Matrix,
    gap: Matrix,
    attn: Matrix,
    pre: Matrix,
    act_out: Matrix,
    activation: Activation,
}

impl SimTACache {
    /// Row-stochastic attention weights used in the forward pass.
    pub fn attention(&self) -> &Matrix {
        &self.attn
    }
}

impl SimTAModuleParams {
    pub fn new(rng: &mut Rng, c_in: usize, c_out: usize) -> Self {
        Self {
            lambda_raw: 0.0,
            beta: 0.0,
            linear: Dense::new(rng, c_in, c_out),
        }
    }

    pub fn lambda(&self) -> f64 {
        softplus(self.lambda_raw)
    }

    pub fn input_dim(&self) -> usize {
        self.linear.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.linear.output_dim()
    }

    /// Forward pass given a precomputed elapsed-time matrix (see
    /// [`elapsed_matrix`]). Stacked modules share one such matrix.
    pub fn forward_with_gap(
        &self,
        x: &Matrix,
        gap: &Matrix,
        activation: Activation,
    ) -> Result<(Matrix, SimTACache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(
                "simta_forward",
                x.shape(),
                self.linear.w.shape(),
            ));
        }
        if gap.rows() != x.rows() {
            return Err(Error::dim("simta_forward", x.shape(), gap.shape()));
        }
        let (scores, mask) = scores_from_gap(gap, self.lambda(), self.beta);
        let attn = softmax_rows(&scores, &mask)?;
        let pre = self.linear.forward(x)?;
        let act_out = activation.forward(&pre);
        let y = attn.matmul(&act_out)?;
        Ok((
            y,
            SimTACache {
                x: x.clone(),
                gap: gap.clone(),
                attn,
                pre,
                act_out,
                activation,
            },
        ))
    }

    /// Reverse pass. Accumulates parameter gradients into `grad` (the decay
    /// gradient is taken w.r.t. `lambda_raw`) and returns the input gradient.
    pub fn backward(
        &self,
        cache: &SimTACache,
        dy: &Matrix,
        grad: &mut SimTAModuleParams,
    ) -> Result<Matrix> {
        // y = P h  ⇒  dP = dy hᵀ, dh = Pᵀ dy
        let d_attn = dy.matmul_t(&cache.act_out)?;
        let d_act = cache.attn.t_matmul(dy)?;
        let d_scores = softmax_rows_backward(&cache.attn, &d_attn)?;

        let mut d_beta = 0.0;
        let mut d_lambda = 0.0;
        for i in 0..d_scores.rows() {
            for j in 0..i {
                let g = d_scores[(i, j)];
                d_beta += g;
                d_lambda -= g * cache.gap[(i, j)];
            }
        }
        grad.beta += d_beta;
        grad.lambda_raw += d_lambda * sigmoid(self.lambda_raw);

        let d_pre = d_act.hadamard(&cache.activation.backward(&cache.pre))?;
        self.linear.backward(&cache.x, &d_pre, &mut grad.linear)
    }
}

impl ParamSet for SimTAModuleParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("lambda_raw", std::slice::from_ref(&self.lambda_raw));
        f("beta", std::slice::from_ref(&self.beta));
        f("w", self.linear.w.data());
        f("b", &self.linear.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("lambda_raw", std::slice::from_mut(&mut self.lambda_raw));
        f("beta", std::slice::from_mut(&mut self.beta));
        f("w", self.linear.w.data_mut());
        f("b", &mut self.linear.b);
    }
}

/// One attention module over values `x` (T×C_in) with adjacent intervals `tau`
/// (length T−1): `softmax(A) · σ(x W + b)`.
pub fn simta_forward(
    x: &Matrix,
    tau: &[f64],
    params: &SimTAModuleParams,
    activation: Activation,
) -> Result<(Matrix, SimTACache)> {
    if tau.len() + 1 != x.rows() {
        return Err(Error::dim("simta_forward", x.shape(), (tau.len() + 1, 1)));
    }
    let gap = elapsed_matrix(tau)?;
    params.forward_with_gap(x, &gap, activation)
}

/// Gradients of one module, returned as `(dx, dparams)`.
pub fn simta_backward(
    params: &SimTAModuleParams,
    cache: &SimTACache,
    upstream: &Matrix,
) -> Result<(Matrix, SimTAModuleParams)> {
    let mut grad = params.zeros_like();
    let dx = params.backward(cache, upstream, &mut grad)?;
    Ok((dx, grad))
}
