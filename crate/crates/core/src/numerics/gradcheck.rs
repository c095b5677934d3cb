use serde::Serialize;

/// Entries whose analytic and numeric magnitudes are both below this are
/// compared absolutely rather than relatively.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_err: f64,
    pub worst_index: Option<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub tol: f64,
    pub passed: bool,
}

/// Relative error `|a − n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares the analytic gradient returned by `f` at `params` against a
/// central finite difference with step `h`.
///
/// `f` maps a parameter vector to `(loss, gradient)`; it must be
/// deterministic. The check passes iff the largest relative error is below
/// `tol` (a non-finite error always fails).
pub fn grad_check<F>(mut f: F, params: &[f64], h: f64, tol: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (_, analytic) = f(params);
    assert_eq!(
        analytic.len(),
        params.len(),
        "gradient length must match parameters"
    );
    let mut probe = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let (plus, _) = f(&probe);
        probe[i] = orig - h;
        let (minus, _) = f(&probe);
        probe[i] = orig;
        numeric.push((plus - minus) / (2.0 * h));
    }
    let mut max_rel_err: f64 = 0.0;
    let mut worst_index = None;
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = rel_err(a, n);
        if e.is_nan() || e > max_rel_err {
            max_rel_err = if e.is_nan() { f64::INFINITY } else { e };
            worst_index = Some(i);
        }
    }
    GradCheckReport {
        n_params: params.len(),
        max_rel_err,
        worst_index,
        analytic,
        numeric,
        tol,
        passed: max_rel_err < tol,
    }
}
