use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Samples per modality in the spatial encoding.
pub const SPATIAL_SAMPLES: usize = 100;
/// Minimum fraction of the reference span a modality must cover.
pub const MIN_OVERLAP: f64 = 0.5;

/// One modality on its native timestamps (`T x width`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modality {
    pub name: String,
    pub timestamps: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Modality {
    pub fn new(
        name: impl Into<String>,
        timestamps: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let name = name.into();
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "modality timestamps/values",
                left: timestamps.len(),
                right: values.len(),
            });
        }
        if timestamps.is_empty() {
            return Err(Error::Alignment(format!("modality '{name}' is empty")));
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Alignment(format!(
                "modality '{name}' timestamps are not strictly increasing"
            )));
        }
        let width = values[0].len();
        if values.iter().any(|r| r.len() != width) {
            return Err(Error::Alignment(format!(
                "modality '{name}' has ragged rows"
            )));
        }
        Ok(Self {
            name,
            timestamps,
            values,
        })
    }

    /// Single-channel modality.
    pub fn scalar(name: impl Into<String>, timestamps: Vec<f64>, values: &[f64]) -> Result<Self> {
        Self::new(name, timestamps, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[c]).collect()
    }

    fn span(&self) -> (f64, f64) {
        (
            self.timestamps[0],
            self.timestamps[self.timestamps.len() - 1],
        )
    }

    fn mean_rate(&self) -> f64 {
        let (a, b) = self.span();
        if b > a {
            (self.timestamps.len() - 1) as f64 / (b - a)
        } else {
            0.0
        }
    }

    /// Copy with every timestamp shifted by `offset` seconds.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            name: self.name.clone(),
            timestamps: self.timestamps.iter().map(|t| t + offset).collect(),
            values: self.values.clone(),
        }
    }
}

/// Declared slot in the concatenated feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalitySlot {
    pub name: String,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedFeatures {
    pub timestamps: Vec<f64>,
    pub slots: Vec<ModalitySlot>,
    /// Concatenated features on the common grid (`T x D_in`).
    pub features: Vec<Vec<f64>>,
    /// Per slot, each channel resampled to [`SPATIAL_SAMPLES`] points,
    /// channel-major.
    pub spatial: Vec<Vec<f64>>,
    /// Which slots were present (absent ones are zero-filled).
    pub present: Vec<bool>,
}

impl AlignedFeatures {
    pub fn dim(&self) -> usize {
        self.slots.iter().map(|s| s.width).sum()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Column range of a slot in `features`.
    pub fn columns(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let mut at = 0;
        for s in &self.slots {
            if s.name == name {
                return Some(at..at + s.width);
            }
            at += s.width;
        }
        None
    }
}

/// Linear interpolation of `(ts, ys)` at `t`, clamped to the end values.
pub fn interp(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    let n = ts.len();
    if n == 1 || t <= ts[0] {
        return ys[0];
    }
    if t >= ts[n - 1] {
        return ys[n - 1];
    }
    let hi = ts.partition_point(|&s| s <= t);
    let lo = hi - 1;
    let w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}

/// Resamples a series to `n` points evenly spaced in index.
pub fn resample_linear(series: &[f64], n: usize) -> Vec<f64> {
    if series.is_empty() || n == 0 {
        return vec![0.0; n];
    }
    if series.len() == 1 || n == 1 {
        return vec![series[0]; n];
    }
    let m = series.len();
    (0..n)
        .map(|i| {
            let pos = (i * (m - 1)) as f64 / (n - 1) as f64;
            let lo = pos.floor() as usize;
            if lo + 1 >= m {
                series[m - 1]
            } else {
                let w = pos - lo as f64;
                if w == 0.0 {
                    series[lo]
                } else {
                    series[lo] + w * (series[lo + 1] - series[lo])
                }
            }
        })
        .collect()
}

/// Interpolates every present modality onto a common grid and concatenates
/// them in `slots` order.
///
/// The grid is the timestamps of `reference` when given, else of the
/// modality named "video", else of the modality with the highest sample
/// rate. Each modality must cover at least half the grid's span.
pub fn align(
    slots: &[ModalitySlot],
    modalities: &[Modality],
    reference: Option<&str>,
) -> Result<AlignedFeatures> {
    if modalities.is_empty() {
        return Err(Error::Alignment("no modality present".into()));
    }
    for m in modalities {
        let slot = slots.iter().find(|s| s.name == m.name).ok_or_else(|| {
            Error::Alignment(format!("modality '{}' has no declared slot", m.name))
        })?;
        if slot.width != m.width() {
            return Err(Error::Alignment(format!(
                "modality '{}' has width {}, slot declares {}",
                m.name,
                m.width(),
                slot.width
            )));
        }
    }
    let find = |name: &str| modalities.iter().find(|m| m.name == name);
    let grid_src = match reference {
        Some(r) => {
            find(r).ok_or_else(|| Error::Alignment(format!("reference '{r}' not present")))?
        }
        None => find("video").unwrap_or_else(|| {
            modalities
                .iter()
                .max_by(|a, b| a.mean_rate().total_cmp(&b.mean_rate()))
                .unwrap()
        }),
    };
    let grid = grid_src.timestamps.clone();
    let (g0, g1) = grid_src.span();
    for m in modalities {
        let (a, b) = m.span();
        let covered = (b.min(g1) - a.max(g0)).max(0.0);
        let span = g1 - g0;
        let frac = if span > 0.0 {
            covered / span
        } else if (a..=b).contains(&g0) {
            1.0
        } else {
            0.0
        };
        if frac < MIN_OVERLAP {
            return Err(Error::Alignment(format!(
                "modality '{}' covers {:.0}% of the reference time range (need {:.0}%)",
                m.name,
                frac * 100.0,
                MIN_OVERLAP * 100.0
            )));
        }
    }

    let d_in: usize = slots.iter().map(|s| s.width).sum();
    let mut features = vec![Vec::with_capacity(d_in); grid.len()];
    let mut spatial = Vec::with_capacity(slots.len());
    let mut present = Vec::with_capacity(slots.len());
    for slot in slots {
        match find(&slot.name) {
            Some(m) => {
                let mut enc = Vec::with_capacity(slot.width * SPATIAL_SAMPLES);
                for c in 0..slot.width {
                    let ch = m.channel(c);
                    let on_grid: Vec<f64> = grid
                        .iter()
                        .map(|&t| interp(&m.timestamps, &ch, t))
                        .collect();
                    enc.extend(resample_linear(&ch, SPATIAL_SAMPLES));
                    for (row, v) in features.iter_mut().zip(&on_grid) {
                        row.push(*v);
                    }
                }
                spatial.push(enc);
                present.push(true);
            }
            None => {
                for row in features.iter_mut() {
                    row.extend(std::iter::repeat_n(0.0, slot.width));
                }
                spatial.push(vec![0.0; slot.width * SPATIAL_SAMPLES]);
                present.push(false);
            }
        }
    }
    Ok(AlignedFeatures {
        timestamps: grid,
        slots: slots.to_vec(),
        features,
        spatial,
        present,
    })
}

/// Time shift (seconds, within `+-max_lag`) that best aligns `other` with
/// `reference`: `other` shifted by the result correlates most strongly with
/// `reference`. Both series are z-scored on a common uniform grid of
/// spacing `step` before correlating.
pub fn estimate_offset(
    reference: &Modality,
    other: &Modality,
    max_lag: f64,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) || !(max_lag >= 0.0) {
        return Err(Error::InvalidArgument(
            "step must be positive and max_lag non-negative".into(),
        ));
    }
    let (r0, r1) = reference.span();
    let n = ((r1 - r0) / step).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| r0 + i as f64 * step).collect();
    let standardize = |v: Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        let s = if s > 1e-12 { s } else { 1.0 };
        v.into_iter().map(|x| (x - m) / s).collect::<Vec<f64>>()
    };
    let rch = reference.channel(0);
    let och = other.channel(0);
    let rv = standardize(
        grid.iter()
            .map(|&t| interp(&reference.timestamps, &rch, t))
            .collect(),
    );
    let (o0, o1) = other.span();
    let max_k = (max_lag / step).round() as i64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in -max_k..=max_k {
        let lag = k as f64 * step;
        // other shifted by `lag`: value at t is other(t - lag)
        let idx: Vec<usize> = (0..n)
            .filter(|&i| {
                let s = grid[i] - lag;
                s >= o0 && s <= o1
            })
            .collect();
        if idx.len() < (n / 2).max(2) {
            continue;
        }
        let ov = standardize(
            idx.iter()
                .map(|&i| interp(&other.timestamps, &och, grid[i] - lag))
                .collect(),
        );
        let rsub = standardize(idx.iter().map(|&i| rv[i]).collect());
        let score = ov.iter().zip(&rsub).map(|(a, b)| a * b).sum::<f64>() / idx.len() as f64;
        if score > best.0 {
            best = (score, lag);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::Alignment(
            "series do not overlap enough to estimate an offset".into(),
        ));
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(name: &str, width: usize) -> ModalitySlot {
        ModalitySlot {
            name: name.into(),
            width,
        }
    }

    #[test]
    fn resample_identity_and_endpoints() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(resample_linear(&s, 100), s);
        let r = resample_linear(&[0.0, 10.0], 11);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[10], 10.0);
        assert!((r[3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_modality_padded() {
        let v = Modality::scalar("video", vec![0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        let a = align(&[slot("video", 1), slot("audio", 2)], &[v], None).unwrap();
        assert_eq!(
            a.features,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![2.0, 0.0, 0.0],
                vec![3.0, 0.0, 0.0]
            ]
        );
        assert_eq!(a.present, vec![true, false]);
        assert_eq!(a.spatial[1], vec![0.0; 200]);
        assert_eq!(a.columns("audio"), Some(1..3));
    }

    #[test]
    fn identical_grids_concatenate_unchanged() {
        let ts = vec![0.0, 0.5, 1.0];
        let v = Modality::scalar("video", ts.clone(), &[1.0, 2.0, 3.0]).unwrap();
        let au = Modality::scalar("audio", ts, &[4.0, 5.0, 6.0]).unwrap();
        let a = align(&[slot("video", 1), slot("audio", 1)], &[au, v], None).unwrap();
        assert_eq!(
            a.features,
            vec![vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]
        );
    }

    #[test]
    fn insufficient_overlap_rejected() {
        let v = Modality::scalar("video", vec![0.0, 10.0], &[0.0, 1.0]).unwrap();
        let au = Modality::scalar("audio", vec![6.0, 20.0], &[0.0, 1.0]).unwrap();
        assert!(matches!(
            align(&[slot("video", 1), slot("audio", 1)], &[v, au], None),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn densest_modality_is_reference_without_video() {
        let a = Modality::scalar(
            "audio",
            (0..50).map(|i| i as f64 * 0.02).collect(),
            &[0.0; 50],
        )
        .unwrap();
        let c = Modality::scalar("chart", vec![0.0, 0.5, 0.98], &[0.0; 3]).unwrap();
        let al = align(&[slot("audio", 1), slot("chart", 1)], &[c, a], None).unwrap();
        assert_eq!(al.len(), 50);
    }

    #[test]
    fn offset_recovered() {
        let ts: Vec<f64> = (0..600).map(|i| i as f64 / 30.0).collect();
        let sig = |t: f64| (1.3 * t).sin() + 0.5 * (0.31 * t * t).cos();
        let r = Modality::scalar(
            "video",
            ts.clone(),
            &ts.iter().map(|&t| sig(t)).collect::<Vec<_>>(),
        )
        .unwrap();
        // other lags reference by 0.7 s: other(t) = sig(t - 0.7)
        let o = Modality::scalar(
            "audio",
            ts.clone(),
            &ts.iter().map(|&t| sig(t - 0.7)).collect::<Vec<_>>(),
        )
        .unwrap();
        let lag = estimate_offset(&r, &o, 2.0, 1.0 / 30.0).unwrap();
        // shifting other back by 0.7 s aligns it
        assert!((lag + 0.7).abs() < 1.5 / 30.0, "{lag}");
    }
}
