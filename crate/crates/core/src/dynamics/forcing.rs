use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exogenous input sampled at increasing timestamps.
///
/// Between samples the signal is linearly interpolated; outside the sampled
/// range it holds the nearest endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSignal {
    timestamps: Vec<f64>,
    values: Vec<Vec<f64>>,
    dim: usize,
}

impl ForcingSignal {
    pub fn new(timestamps: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "forcing timestamps/values",
                left: timestamps.len(),
                right: values.len(),
            });
        }
        if timestamps.is_empty() {
            return Err(Error::InvalidArgument("empty forcing signal".into()));
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "forcing timestamps not strictly increasing at sample {}",
                i + 1
            )));
        }
        let dim = values[0].len();
        if let Some(row) = values.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                what: "forcing row",
                expected: dim,
                got: row.len(),
            });
        }
        Ok(Self {
            timestamps,
            values,
            dim,
        })
    }

    /// Constant forcing held for all time.
    pub fn constant(values: Vec<f64>) -> Self {
        let dim = values.len();
        Self {
            timestamps: vec![0.0],
            values: vec![values],
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let ts = &self.timestamps;
        let n = ts.len();
        if t <= ts[0] || n == 1 {
            return self.values[0].clone();
        }
        if t >= ts[n - 1] {
            return self.values[n - 1].clone();
        }
        // first index with ts[i] > t
        let hi = ts.partition_point(|&s| s <= t);
        let lo = hi - 1;
        let w = (t - ts[lo]) / (ts[hi] - ts[lo]);
        self.values[lo]
            .iter()
            .zip(&self.values[hi])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&c) = channels.iter().find(|&&c| c >= self.dim) {
            return Err(Error::Dimension {
                what: "forcing channel",
                expected: self.dim,
                got: c,
            });
        }
        let values = self
            .values
            .iter()
            .map(|r| channels.iter().map(|&c| r[c]).collect())
            .collect();
        Ok(Self {
            timestamps: self.timestamps.clone(),
            values,
            dim: channels.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let f = ForcingSignal::new(vec![0.0, 1.0, 3.0], vec![vec![0.0], vec![2.0], vec![-2.0]])
            .unwrap();
        assert_eq!(f.at(0.5), vec![1.0]);
        assert_eq!(f.at(2.0), vec![0.0]);
        assert_eq!(f.at(-4.0), vec![0.0]);
        assert_eq!(f.at(10.0), vec![-2.0]);
        assert_eq!(f.at(1.0), vec![2.0]);
    }

    #[test]
    fn rejects_non_increasing_timestamps() {
        let err = ForcingSignal::new(vec![0.0, 1.0, 1.0], vec![vec![0.0]; 3]).unwrap_err();
        assert!(err.to_string().contains("sample 2"));
    }
}
