use crate::error::{Error, Result};
use crate::numerics::{Mask, Matrix};

/// Elapsed time between steps, `gap[i][j] = τ_j + … + τ_{i−1}` for `j < i`.
///
/// Built from one prefix sum, so the whole matrix costs O(T²).
pub fn elapsed_matrix(tau: &[f64]) -> Result<Matrix> {
    if let Some((k, t)) = tau
        .iter()
        .enumerate()
        .find(|(_, t)| !(**t > 0.0 && t.is_finite()))
    {
        return Err(Error::InvalidSeries(format!(
            "interval {k} is {t}; intervals must be positive"
        )));
    }
    let n = tau.len() + 1;
    let mut prefix = Vec::with_capacity(n);
    prefix.push(0.0);
    for t in tau {
        prefix.push(prefix.last().unwrap() + t);
    }
    let mut gap = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            gap[(i, j)] = prefix[i] - prefix[j];
        }
    }
    Ok(gap)
}

/// Pre-softmax attention scores: zero on the diagonal, `−λ·gap + β` below
/// it, and masked above it (the future is never attended).
///
/// Masked entries hold 0.0 in the returned matrix; the mask is what marks
/// them as excluded.
pub fn build_attention(tau: &[f64], lambda: f64, beta: f64) -> Result<(Matrix, Mask)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!(
            "attention decay must be positive, got {lambda}"
        )));
    }
    let gap = elapsed_matrix(tau)?;
    Ok(scores_from_gap(&gap, lambda, beta))
}

pub(crate) fn scores_from_gap(gap: &Matrix, lambda: f64, beta: f64) -> (Matrix, Mask) {
    let n = gap.rows();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            a[(i, j)] = -lambda * gap[(i, j)] + beta;
        }
    }
    (a, Mask::causal(n))
}
