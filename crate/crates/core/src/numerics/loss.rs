use super::{Mask, Matrix};
use crate::error::{Error, Result};

/// Row-wise softmax over unmasked entries. Masked entries come out as exactly
/// zero and take no part in the normalization.
pub fn softmax_rows(a: &Matrix, mask: &Mask) -> Result<Matrix> {
    if a.shape() != mask.shape() {
        return Err(Error::dim("softmax_rows", a.shape(), mask.shape()));
    }
    let mut out = Matrix::zeros(a.rows(), a.cols());
    for i in 0..a.rows() {
        let row = a.row(i);
        let max = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| !mask.is_masked(i, j))
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::InvalidMask { row: i });
        }
        let out_row = out.row_mut(i);
        let mut total = 0.0;
        for (j, (&v, o)) in row.iter().zip(out_row.iter_mut()).enumerate() {
            if !mask.is_masked(i, j) {
                *o = (v - max).exp();
                total += *o;
            }
        }
        for o in out_row.iter_mut() {
            *o /= total;
        }
    }
    Ok(out)
}

/// Gradient of a loss w.r.t. pre-softmax scores, given the softmax output
/// `p` and the gradient w.r.t. `p`. Masked entries have zero gradient since
/// `p` is zero there.
pub fn softmax_rows_backward(p: &Matrix, dp: &Matrix) -> Result<Matrix> {
    if p.shape() != dp.shape() {
        return Err(Error::dim("softmax_rows_backward", p.shape(), dp.shape()));
    }
    let mut ds = Matrix::zeros(p.rows(), p.cols());
    for i in 0..p.rows() {
        let pr = p.row(i);
        let dr = dp.row(i);
        let inner: f64 = pr.iter().zip(dr).map(|(a, b)| a * b).sum();
        for (o, (&pv, &dv)) in ds.row_mut(i).iter_mut().zip(pr.iter().zip(dr)) {
            *o = pv * (dv - inner);
        }
    }
    Ok(ds)
}

/// Mean squared error and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim("mse_loss", pred.shape(), target.shape()));
    }
    let n = pred.data().len().max(1) as f64;
    let diff = pred.sub(target)?;
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff.scale(2.0 / n)))
}

/// Mean two-class softmax cross-entropy. `logits` is `n × 2` (column 1 is
/// the positive class), `labels` holds one 0/1 label per row. Returns the
/// loss and the gradient `(softmax − onehot) / n`.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[u8]) -> Result<(f64, Matrix)> {
    if logits.cols() != 2 || logits.rows() != labels.len() {
        return Err(Error::dim(
            "cross_entropy_loss",
            logits.shape(),
            (labels.len(), 2),
        ));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 1) {
        return Err(Error::InvalidLabel { index, label });
    }
    let n = labels.len().max(1) as f64;
    let mut grad = Matrix::zeros(logits.rows(), 2);
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let (p, logp) = softmax2(logits[(i, 0)], logits[(i, 1)]);
        loss -= logp[label as usize];
        for k in 0..2 {
            let onehot = if k == label as usize { 1.0 } else { 0.0 };
            grad[(i, k)] = (p[k] - onehot) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Probabilities and log-probabilities of a two-class softmax.
pub fn softmax2(a: f64, b: f64) -> ([f64; 2], [f64; 2]) {
    let m = a.max(b);
    let lse = m + ((a - m).exp() + (b - m).exp()).ln();
    let logp = [a - lse, b - lse];
    ([logp[0].exp(), logp[1].exp()], logp)
}
