use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sinusoidal encoding of a continuous, non-negative time offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalEncoding {
    pub dim: usize,
    pub base: f64,
}

impl TemporalEncoding {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_base(dim, 10_000.0)
    }

    pub fn with_base(dim: usize, base: f64) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Config(format!(
                "temporal encoding dim must be even and positive, got {dim}"
            )));
        }
        if !(base > 0.0) {
            return Err(Error::Config(format!(
                "temporal encoding base must be positive, got {base}"
            )));
        }
        Ok(Self { dim, base })
    }

    /// `[sin(δt/base^(2k/dim)), cos(δt/base^(2k/dim))]` for `k = 0..dim/2`.
    pub fn encode(&self, delta_t: f64) -> Result<Vec<f64>> {
        if !(delta_t >= 0.0 && delta_t.is_finite()) {
            return Err(Error::InvalidOffset(delta_t));
        }
        let mut out = Vec::with_capacity(self.dim);
        for k in 0..self.dim / 2 {
            let rate = self.base.powf((2 * k) as f64 / self.dim as f64);
            let angle = delta_t / rate;
            out.push(angle.sin());
            out.push(angle.cos());
        }
        Ok(out)
    }
}

pub fn temporal_encode(delta_t: f64, enc: &TemporalEncoding) -> Result<Vec<f64>> {
    enc.encode(delta_t)
}
