use serde::{Deserialize, Serialize};

use crate::dynamics::{ForcingSignal, SystemSpec};
use crate::ingest::{resample_linear, AlignedFeatures, SPATIAL_SAMPLES};
use crate::integrator::Trajectory;
use crate::{Error, Result};

/// Below this a channel's standard deviation is replaced by 1.
pub const STD_GUARD: f64 = 1e-8;

/// Overlapping windows of `len` rows starting every `stride` rows.
pub fn make_windows<T>(series: &[T], len: usize, stride: usize) -> Result<Vec<&[T]>> {
    if len == 0 || stride == 0 {
        return Err(Error::InvalidArgument(
            "window length and stride must be positive".into(),
        ));
    }
    if series.len() < len {
        return Err(Error::TooShort {
            need: len,
            got: series.len(),
        });
    }
    Ok((0..=(series.len() - len) / stride)
        .map(|k| &series[k * stride..k * stride + len])
        .collect())
}

/// Per-channel standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose spread fell below [`STD_GUARD`].
    pub guarded: Vec<bool>,
}

impl ZScore {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for i in 0..d {
                var[i] += (r[i] - mean[i]).powi(2);
            }
        }
        let mut std = Vec::with_capacity(d);
        let mut guarded = Vec::with_capacity(d);
        for v in var {
            let s = (v / n).sqrt();
            if s < STD_GUARD {
                std.push(1.0);
                guarded.push(true);
            } else {
                std.push(s);
                guarded.push(false);
            }
        }
        Self { mean, std, guarded }
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect()
    }

    pub fn invert(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, s))| v * s + m)
                    .collect()
            })
            .collect()
    }
}

/// Everything a training run consumes.
#[derive(Debug, Clone)]
pub struct TrainData {
    /// All `D` state columns; unmeasured ones are ignored.
    pub observations: Trajectory,
    pub forcing: Option<ForcingSignal>,
    /// Network features, one row per observation sample.
    pub features: Vec<Vec<f64>>,
    /// Fixed-width summary of the whole recording, shared by every step.
    pub spatial: Vec<f64>,
}

impl TrainData {
    pub fn new(
        observations: Trajectory,
        forcing: Option<ForcingSignal>,
        features: Vec<Vec<f64>>,
        spatial: Vec<f64>,
    ) -> Result<Self> {
        if features.len() != observations.len() {
            return Err(Error::LengthMismatch {
                what: "features/observations",
                left: features.len(),
                right: observations.len(),
            });
        }
        let d = features.first().map_or(0, Vec::len);
        if d == 0 || d >= crate::ltcnet::INPUT_DIM {
            return Err(Error::InvalidArgument(format!(
                "feature width must be in 1..{}, got {d}",
                crate::ltcnet::INPUT_DIM
            )));
        }
        if features.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("ragged feature rows".into()));
        }
        Ok(Self {
            observations,
            forcing,
            features,
            spatial,
        })
    }

    /// Features are the measured channels followed by any forcing channels
    /// sampled at the observation timestamps.
    pub fn from_observations(
        spec: &SystemSpec,
        observations: Trajectory,
        forcing: Option<ForcingSignal>,
    ) -> Result<Self> {
        if observations.state_dim() != spec.state_dim() {
            return Err(Error::Dimension {
                what: "observation columns",
                expected: spec.state_dim(),
                got: observations.state_dim(),
            });
        }
        let measured: Vec<usize> = (0..spec.state_dim())
            .filter(|&i| spec.measurement_mask[i])
            .collect();
        let features: Vec<Vec<f64>> = observations
            .timestamps()
            .iter()
            .zip(observations.states())
            .map(|(&t, row)| {
                let mut f: Vec<f64> = measured.iter().map(|&i| row[i]).collect();
                if let Some(u) = &forcing {
                    f.extend(u.at(t));
                }
                f
            })
            .collect();
        let spatial = spatial_of(&features);
        Self::new(observations, forcing, features, spatial)
    }

    /// Uses ingest output as network features. The aligned grid must match
    /// the observation timestamps.
    pub fn from_aligned(
        observations: Trajectory,
        forcing: Option<ForcingSignal>,
        aligned: &AlignedFeatures,
    ) -> Result<Self> {
        if aligned.len() != observations.len() {
            return Err(Error::LengthMismatch {
                what: "aligned features/observations",
                left: aligned.len(),
                right: observations.len(),
            });
        }
        let spatial = aligned.spatial.concat();
        Self::new(observations, forcing, aligned.features.clone(), spatial)
    }
}

/// Channel-major concatenation of each column resampled to 100 points.
pub fn spatial_of(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    (0..d)
        .flat_map(|c| {
            let ch: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            resample_linear(&ch, SPATIAL_SAMPLES)
        })
        .collect()
}

/// Network input rows: standardized features followed by the standardized
/// spatial encoding resampled to fill the remaining slots.
pub fn network_inputs(
    features: &[Vec<f64>],
    spatial: &[f64],
    z: &ZScore,
    input_dim: usize,
) -> Vec<Vec<f64>> {
    let d = z.mean.len();
    let tail_len = input_dim - d;
    // spatial blocks are per feature channel when widths agree
    let spatial_z: Vec<f64> = if spatial.len() == d * SPATIAL_SAMPLES {
        spatial
            .chunks(SPATIAL_SAMPLES)
            .enumerate()
            .flat_map(|(c, blk)| blk.iter().map(move |v| (v - z.mean[c]) / z.std[c]))
            .collect()
    } else {
        let m = spatial.iter().sum::<f64>() / spatial.len().max(1) as f64;
        let s = (spatial.iter().map(|v| (v - m).powi(2)).sum::<f64>()
            / spatial.len().max(1) as f64)
            .sqrt();
        let s = if s < STD_GUARD { 1.0 } else { s };
        spatial.iter().map(|v| (v - m) / s).collect()
    };
    let tail = resample_linear(&spatial_z, tail_len);
    z.apply(features)
        .into_iter()
        .map(|mut r| {
            r.extend_from_slice(&tail);
            r
        })
        .collect()
}
