//! Simple temporal attention over asynchronous series.
//!
//! Each module mixes a per-step feature map `σ(x W + b)` with causal
//! attention whose pre-softmax score between step `i` and an earlier step
//! `j` is `−λ·(t_i − t_j) + β`. Scores depend on intervals only, so shifting
//! every timestamp by a constant changes nothing.

mod attention;
mod encoding;
mod layer;
mod series;
mod stack;

pub use attention::{build_attention, elapsed_matrix};
pub use encoding::{temporal_encode, TemporalEncoding};
pub use layer::{simta_backward, simta_forward, SimTACache, SimTAModuleParams};
pub use series::AsyncSeries;
pub use stack::{stack_forward, SimTAStack, StackCache};
