use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    #[default]
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative at `x` (relu uses 0 at the kink).
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn forward(self, x: &Matrix) -> Matrix {
        x.map(|v| self.apply(v))
    }

    pub fn backward(self, x: &Matrix) -> Matrix {
        x.map(|v| self.derivative(v))
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(crate::Error::Config(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, stable for large |x|.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    Activation::Relu.forward(x)
}

pub fn tanh(x: &Matrix) -> Matrix {
    Activation::Tanh.forward(x)
}

pub fn sigmoid_matrix(x: &Matrix) -> Matrix {
    Activation::Sigmoid.forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_definition() {
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_eq!(Activation::Relu.apply(3.0), 3.0);
    }

    #[test]
    fn sigmoid_symmetry_point() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(4.0) + sigmoid(-4.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_central_difference() {
        let h = 1e-6;
        assert_eq!(Activation::Tanh.derivative(0.0), 1.0);
        for act in [
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Relu,
            Activation::Identity,
        ] {
            for &x in &[-1.7, -0.3, 0.0, 0.4, 2.2] {
                if act == Activation::Relu && x == 0.0 {
                    continue;
                }
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert!((fd - act.derivative(x)).abs() < 1e-8, "{act:?} at {x}");
            }
        }
    }

    #[test]
    fn softplus_is_positive_and_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(softplus(-50.0) > 0.0);
        assert!((softplus(100.0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_helpers() {
        let m = Matrix::from_rows(&[[-1.0, 0.0, 2.0]]).unwrap();
        assert_eq!(relu(&m).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(tanh(&m)[(0, 1)], 0.0);
        assert_eq!(sigmoid_matrix(&m)[(0, 1)], 0.5);
    }
}
