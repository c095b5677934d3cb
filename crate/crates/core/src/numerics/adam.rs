use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam optimizer state with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One Adam update in place. Gradients are validated before anything is
/// mutated, so a rejected step leaves both `params` and `state` untouched.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::dim(
            "adam_step",
            (params.len(), grads.len()),
            (state.m.len(), state.v.len()),
        ));
    }
    if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::Numeric { index, value });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = vec![0.3, -1.2, 4.0];
        let before = p.clone();
        let mut s = AdamState::new(3, 1e-3);
        adam_step(&mut p, &[0.0; 3], &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
        for _ in 0..50 {
            adam_step(&mut p, &[0.0; 3], &mut s).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = g, v̂ = g², so the update is lr·g/(|g|+ε).
        let mut p = vec![1.0];
        let mut s = AdamState::new(1, 0.1);
        adam_step(&mut p, &[2.0], &mut s).unwrap();
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn deterministic_over_ten_steps() {
        let run = || {
            let mut rng = Rng::new(99);
            let mut p: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
            let mut s = AdamState::new(8, 1e-2);
            for _ in 0..10 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + rng.normal()).collect();
                adam_step(&mut p, &g, &mut s).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn non_finite_gradient_names_index() {
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3, 1e-3);
        let err = adam_step(&mut p, &[0.0, f64::NAN, 0.0], &mut s).unwrap_err();
        assert!(matches!(err, Error::Numeric { index: 1, .. }));
        assert_eq!(s.step, 0);
    }

    #[test]
    fn length_mismatch() {
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(2, 1e-3);
        assert!(adam_step(&mut p, &[0.0; 3], &mut s).is_err());
    }
}
