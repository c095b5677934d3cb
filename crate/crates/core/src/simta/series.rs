use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Values of one modality observed at strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsyncSeries {
    values: Matrix,
    timestamps: Vec<f64>,
}

impl AsyncSeries {
    pub fn new(values: Matrix, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::InvalidSeries(
                "series must have at least one step".into(),
            ));
        }
        if values.rows() != timestamps.len() {
            return Err(Error::dim(
                "AsyncSeries::new",
                values.shape(),
                (timestamps.len(), 1),
            ));
        }
        if let Some(t) = timestamps.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite timestamp {t}")));
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(format!(
                "timestamps not strictly increasing at step {}: {} -> {}",
                w + 1,
                timestamps[w],
                timestamps[w + 1]
            )));
        }
        Ok(Self { values, timestamps })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn last_timestamp(&self) -> f64 {
        *self.timestamps.last().expect("non-empty by construction")
    }

    /// Adjacent gaps `t[i+1] − t[i]`, length `T − 1`, all positive.
    pub fn intervals(&self) -> Vec<f64> {
        self.timestamps.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Observations with `t <= cutoff`, or `None` if there are none.
    pub fn truncate_at(&self, cutoff: f64) -> Option<AsyncSeries> {
        let n = self.timestamps.partition_point(|&t| t <= cutoff);
        if n == 0 {
            return None;
        }
        Some(AsyncSeries {
            values: self.values.head_rows(n),
            timestamps: self.timestamps[..n].to_vec(),
        })
    }

    /// Same values with every timestamp shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Result<AsyncSeries> {
        AsyncSeries::new(
            self.values.clone(),
            self.timestamps.iter().map(|t| t + offset).collect(),
        )
    }

    /// Applies `f` to every value, keeping timestamps.
    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> AsyncSeries {
        let mut values = self.values.clone();
        for i in 0..values.rows() {
            for (c, v) in values.row_mut(i).iter_mut().enumerate() {
                *v = f(c, *v);
            }
        }
        AsyncSeries {
            values,
            timestamps: self.timestamps.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(ts: &[f64]) -> Result<AsyncSeries> {
        AsyncSeries::new(Matrix::zeros(ts.len(), 2), ts.to_vec())
    }

    #[test]
    fn rejects_bad_timestamps() {
        assert!(series(&[]).is_err());
        assert!(series(&[0.0, 0.0]).is_err());
        assert!(series(&[1.0, 0.5]).is_err());
        assert!(series(&[0.0, f64::NAN]).is_err());
        assert!(AsyncSeries::new(Matrix::zeros(3, 1), vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn intervals_and_truncation() {
        let s = series(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        assert_eq!(s.intervals(), vec![1.0, 2.0, 4.0]);
        assert_eq!(s.truncate_at(3.0).unwrap().len(), 3);
        assert_eq!(s.truncate_at(2.9).unwrap().len(), 2);
        assert!(s.truncate_at(-1.0).is_none());
    }
}
