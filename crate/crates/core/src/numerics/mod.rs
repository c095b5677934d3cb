//! Dense matrices, activations, losses, Adam, seeded randomness and a
//! finite-difference gradient checker.
//!
//! Everything is `f64`: gradient checks at a 1e-5 relative tolerance are not
//! meaningful in single precision.

mod activation;
mod adam;
mod gradcheck;
mod loss;
mod matrix;
mod params;
mod rng;

pub use activation::{relu, sigmoid, sigmoid_matrix, softplus, tanh, Activation};
pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, rel_err, GradCheckReport, REL_ERR_FLOOR};
pub use loss::{cross_entropy_loss, mse_loss, softmax2, softmax_rows, softmax_rows_backward};
pub use matrix::{dot, Mask, Matrix};
pub use params::{glorot, ParamSet};
pub use rng::Rng;
