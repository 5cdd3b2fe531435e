//! Run configuration for `fit` and the ingest pipeline it drives.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use physid::dynamics::{registry_lookup, ForcingSignal, Registry, SystemSpec};
use physid::ingest::{
    align, apply_audio_prior, band_peaks, digitize_chart, kalman_smooth, load_image,
    pixel_to_angle, pixels_to_meters, read_csv_trajectory, resample_digitized, to_target_rate,
    wav_features, weighted_moving_average, AudioPrior, AxisCalibration, KalmanParams, Modality,
    ModalitySlot, DEFAULT_COLOR_TOLERANCE,
};
use physid::integrator::Trajectory;
use physid::trainer::{TrainConfig, TrainData};

use crate::error::{CliError, Result};
use crate::table::{read_forcing, read_table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: String,
    /// Extra system definitions (TOML).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
    /// Replaces the system's nominal parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<Vec<f64>>,
    /// Known parameters; only used to score the estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![42]
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `t,<states>[,u1..uF]` CSV; either every state or only the measured ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    /// `t,u1..uF` CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<VideoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<AudioConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoMode {
    /// Angle from the downward vertical through `pivot`, positive to the right.
    Angle,
    /// Displacement along `axis` in metres.
    Position,
    /// Time derivative of the displacement along `axis`.
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    /// Image rows, growing downward.
    #[default]
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoConfig {
    /// `t,x,y` CSV of tracked pixel positions.
    pub track: PathBuf,
    pub mode: VideoMode,
    /// State receiving the series; defaults to the first measured state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot: Option<[f64; 2]>,
    #[serde(default)]
    pub origin: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meters_per_pixel: Option<f64>,
    #[serde(default)]
    pub axis: Axis,
    #[serde(default = "default_smoothing")]
    pub smoothing_window: usize,
    #[serde(default)]
    pub kalman: KalmanParams,
}

fn default_smoothing() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub image: PathBuf,
    /// Pixel box `[left, right, top, bottom]`.
    pub pixels: [f64; 4],
    /// Data box `[t_left, t_right, y_bottom, y_top]`.
    pub values: [f64; 4],
    pub fps: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub curve: Vec<CurveConfig>,
}

fn default_tolerance() -> f64 {
    DEFAULT_COLOR_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub color: [u8; 3],
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioConfig {
    pub wav: PathBuf,
    /// Seconds added to audio timestamps to put them on the observation clock.
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub tone: Vec<ToneConfig>,
}

/// A frequency band whose peak encodes one forcing channel through
/// `f = alpha * v + beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub band: [f64; 2],
    pub alpha: f64,
    pub beta: f64,
    /// Zero-based forcing channel.
    pub forcing_channel: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads a config and makes its relative paths relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let read_err = |source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        };
        let text = std::fs::read_to_string(path).map_err(read_err)?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = std::path::absolute(path).map_err(read_err)?;
        cfg.rebase(base.parent().unwrap_or(Path::new("/")));
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        if let Some(r) = &mut self.registry {
            fix(r);
        }
        let d = &mut self.data;
        for p in [&mut d.trajectory, &mut d.forcing].into_iter().flatten() {
            fix(p);
        }
        if let Some(v) = &mut d.video {
            fix(&mut v.track);
        }
        if let Some(c) = &mut d.chart {
            fix(&mut c.image);
        }
        if let Some(a) = &mut d.audio {
            fix(&mut a.wav);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn spec(&self) -> Result<SystemSpec> {
        let spec = match &self.registry {
            Some(path) => Registry::from_toml_file(path)?.lookup(&self.system)?,
            None => registry_lookup(&self.system)?,
        };
        match &self.nominal {
            Some(n) => Ok(spec.with_nominal(n)?),
            None => Ok(spec),
        }
    }

    pub fn load_data(&self, spec: &SystemSpec) -> Result<TrainData> {
        let (obs, mut forcing) = self.observations(spec)?;
        if let Some(path) = &self.data.forcing {
            forcing = Some(read_forcing(path)?);
        }
        let measured: Vec<usize> = (0..spec.state_dim())
            .filter(|&i| spec.measurement_mask[i])
            .collect();
        let mut slots = vec![ModalitySlot {
            name: "observed".into(),
            width: measured.len(),
        }];
        let mut modalities = vec![Modality::new(
            "observed",
            obs.timestamps().to_vec(),
            obs.states()
                .iter()
                .map(|r| measured.iter().map(|&i| r[i]).collect())
                .collect(),
        )?];

        if let Some(audio) = &self.data.audio {
            let (feat, tones) = audio_inputs(audio, spec, forcing.as_ref())?;
            slots.push(ModalitySlot {
                name: "audio".into(),
                width: 3,
            });
            modalities.push(feat);
            if tones.is_some() {
                forcing = tones;
            }
        }
        if let Some(f) = &forcing {
            slots.push(ModalitySlot {
                name: "forcing".into(),
                width: f.dim(),
            });
            modalities.push(Modality::new(
                "forcing",
                f.timestamps().to_vec(),
                f.values().to_vec(),
            )?);
        }
        let aligned = align(&slots, &modalities, Some("observed"))?;
        Ok(TrainData::from_aligned(obs, forcing, &aligned)?)
    }

    fn observations(&self, spec: &SystemSpec) -> Result<(Trajectory, Option<ForcingSignal>)> {
        let d = &self.data;
        let sources = [d.trajectory.is_some(), d.video.is_some(), d.chart.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(CliError::Usage(
                "data needs exactly one of 'trajectory', 'video' or 'chart'".into(),
            ));
        }
        if let Some(path) = &d.trajectory {
            let traj = read_csv_trajectory(path)?;
            let forcing = traj.forcing_signal().transpose()?;
            return Ok((expand_states(spec, traj, path)?, forcing));
        }
        if let Some(v) = &d.video {
            let (ts, series) = video_series(v)?;
            let ch = channel_index(spec, v.channel.as_deref())?;
            return Ok((fill_channels(spec, ts, &[(ch, series)])?, None));
        }
        let c = d.chart.as_ref().expect("one source present");
        let img = load_image(&c.image)?;
        let calib = AxisCalibration::from_box(c.pixels, c.values);
        calib.validate()?;
        let mut curves = Vec::with_capacity(c.curve.len());
        let mut channels = Vec::with_capacity(c.curve.len());
        for cur in &c.curve {
            curves.push(digitize_chart(&img, cur.color, c.tolerance, &calib)?);
            channels.push(channel_index(spec, Some(&cur.channel))?);
        }
        let (grid, values) = resample_digitized(&curves, c.fps)?;
        let filled: Vec<(usize, Vec<f64>)> = channels.into_iter().zip(values).collect();
        let traj = fill_channels(spec, grid, &filled)?;
        Ok((traj.with_fps(c.fps), None))
    }
}

fn channel_index(spec: &SystemSpec, name: Option<&str>) -> Result<usize> {
    match name {
        Some(n) => {
            spec.state_names.iter().position(|s| s == n).ok_or_else(|| {
                CliError::Usage(format!("system '{}' has no state '{n}'", spec.name))
            })
        }
        None => spec
            .measurement_mask
            .iter()
            .position(|&m| m)
            .ok_or_else(|| {
                CliError::Usage(format!("system '{}' has no measured state", spec.name))
            }),
    }
}

fn fill_channels(
    spec: &SystemSpec,
    ts: Vec<f64>,
    series: &[(usize, Vec<f64>)],
) -> Result<Trajectory> {
    let states = (0..ts.len())
        .map(|k| {
            let mut row = vec![0.0; spec.state_dim()];
            for (ch, s) in series {
                row[*ch] = s[k];
            }
            row
        })
        .collect();
    Ok(Trajectory::new(ts, states, None)?)
}

/// Accepts either every state column or only the measured ones.
fn expand_states(spec: &SystemSpec, traj: Trajectory, path: &Path) -> Result<Trajectory> {
    let d = spec.state_dim();
    if traj.state_dim() == d {
        return Ok(Trajectory::new(
            traj.timestamps().to_vec(),
            traj.states().to_vec(),
            None,
        )?);
    }
    let measured: Vec<usize> = (0..d).filter(|&i| spec.measurement_mask[i]).collect();
    if traj.state_dim() != measured.len() {
        return Err(CliError::data(
            path,
            format!(
                "expected {d} state columns (or {} measured), found {}",
                measured.len(),
                traj.state_dim()
            ),
        ));
    }
    let series: Vec<(usize, Vec<f64>)> = measured
        .iter()
        .enumerate()
        .map(|(k, &ch)| (ch, traj.channel(k)))
        .collect();
    fill_channels(spec, traj.timestamps().to_vec(), &series)
}

fn median_dt(ts: &[f64]) -> f64 {
    let mut d: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Tracked pixels through smoothing, unit conversion and averaging.
pub fn video_series(v: &VideoConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let table = read_table(&v.track)?;
    let (Some(ts), Some(xs), Some(ys)) = (table.column("t"), table.column("x"), table.column("y"))
    else {
        return Err(CliError::data(&v.track, "expected columns t, x and y"));
    };
    if ts.len() < 2 {
        return Err(CliError::data(&v.track, "need at least two tracked frames"));
    }
    let dt = median_dt(&ts);
    let xy: Vec<[f64; 2]> = xs.iter().zip(&ys).map(|(&x, &y)| [x, y]).collect();
    let smooth = kalman_smooth(&xy, dt, v.kalman)?;
    let raw = match v.mode {
        VideoMode::Angle => {
            let pivot = v
                .pivot
                .ok_or_else(|| CliError::Usage("video mode 'angle' needs 'pivot'".into()))?;
            pixel_to_angle(&smooth, pivot)?
                .into_iter()
                .map(|a| std::f64::consts::FRAC_PI_2 - a)
                .collect()
        }
        VideoMode::Position | VideoMode::Velocity => {
            let mpp = v.meters_per_pixel.ok_or_else(|| {
                CliError::Usage("video position modes need 'meters_per_pixel'".into())
            })?;
            let k = if v.axis == Axis::X { 0 } else { 1 };
            let pos: Vec<f64> = pixels_to_meters(&smooth, v.origin, mpp)
                .iter()
                .map(|p| p[k])
                .collect();
            if v.mode == VideoMode::Position {
                pos
            } else {
                gradient(&ts, &pos)
            }
        }
    };
    Ok((ts, weighted_moving_average(&raw, v.smoothing_window)?))
}

/// Central differences inside, one-sided at the ends.
fn gradient(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (ys[b] - ys[a]) / (ts[b] - ts[a])
        })
        .collect()
}

/// Spectral features as a modality, plus forcing with tone-derived channels
/// replacing those of `base`.
fn audio_inputs(
    cfg: &AudioConfig,
    spec: &SystemSpec,
    base: Option<&ForcingSignal>,
) -> Result<(Modality, Option<ForcingSignal>)> {
    let (samples, sr) = physid::ingest::read_wav(&cfg.wav)?;
    let samples = to_target_rate(samples, sr)?;
    let sr = physid::ingest::TARGET_RATE;
    let feats = wav_features(&samples, sr)?;
    let times: Vec<f64> = feats.times.iter().map(|t| t + cfg.offset).collect();
    let rows = (0..feats.len())
        .map(|k| vec![feats.rms[k], feats.centroid[k], feats.peak[k]])
        .collect();
    let modality = Modality::new("audio", times, rows)?;
    if cfg.tone.is_empty() {
        return Ok((modality, None));
    }
    let f_dim = spec.forcing_dim;
    if let Some(t) = cfg.tone.iter().find(|t| t.forcing_channel >= f_dim) {
        return Err(CliError::Usage(format!(
            "tone forcing_channel {} out of range for {} forcing channels",
            t.forcing_channel, f_dim
        )));
    }
    let bands: Vec<(f64, f64)> = cfg.tone.iter().map(|t| (t.band[0], t.band[1])).collect();
    let (ptimes, peaks) = band_peaks(&samples, sr, &bands)?;
    let speeds: Vec<Vec<f64>> = cfg
        .tone
        .iter()
        .zip(&peaks)
        .map(|(t, p)| {
            apply_audio_prior(
                p,
                AudioPrior {
                    alpha: t.alpha,
                    beta: t.beta,
                },
            )
        })
        .collect::<physid::Result<_>>()?;
    let ptimes: Vec<f64> = ptimes.iter().map(|t| t + cfg.offset).collect();
    let values = ptimes
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut row = base.map_or_else(|| vec![0.0; f_dim], |f| f.at(t));
            for (tone, s) in cfg.tone.iter().zip(&speeds) {
                row[tone.forcing_channel] = s[k];
            }
            row
        })
        .collect();
    Ok((modality, Some(ForcingSignal::new(ptimes, values)?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
system = "pendulum"
seeds = [42, 43]
out = "runs/pendulum"

[data]
trajectory = "obs.csv"

[train]
max_epochs = 20
"#;

    #[test]
    fn parses_and_rebases() {
        let mut cfg = RunConfig::from_toml(EXAMPLE, Path::new("x.toml")).unwrap();
        cfg.rebase(Path::new("/data"));
        assert_eq!(
            cfg.data.trajectory.as_deref(),
            Some(Path::new("/data/obs.csv"))
        );
        assert_eq!(cfg.train.max_epochs, 20);
        assert_eq!(cfg.train.window, TrainConfig::default().window);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::from_toml(EXAMPLE, Path::new("x.toml")).unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml(), Path::new("y.toml")).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = EXAMPLE.replace("seeds", "seedz");
        assert!(matches!(
            RunConfig::from_toml(&bad, Path::new("x.toml")),
            Err(CliError::ConfigParse { .. })
        ));
    }

    #[test]
    fn gradient_of_line() {
        let ts = [0.0, 0.5, 1.0, 1.5];
        let g = gradient(&ts, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g, vec![2.0; 4]);
    }
}
