//! End-to-end synthetic experiments: a known system is simulated, passed
//! through the relevant front-end and fitted, then scored against the truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    registry_lookup, sliding_block_acceleration, Dynamics, ForcingSignal, SystemSpec,
};
use crate::ingest::{
    add_noise_snr, apply_audio_prior, band_peaks, digitize_chart, render_chart, resample_digitized,
    synth_tones, AudioPrior, AxisCalibration, Curve, DEFAULT_COLOR_TOLERANCE, TARGET_RATE,
};
use crate::integrator::{simulate, Trajectory};
use crate::synth::{default_forcing, default_setup, rover_forcing, synthesize};
use crate::trainer::{train, EstimateReport, TrainConfig, TrainData};
use crate::{Error, Result};

/// Nominal parameters sit this factor away from the truth, so recovery has
/// to move the estimate off the centre of the denormalization range.
pub const NOMINAL_OFFSET: f64 = 1.15;

/// Sample rate of every synthetic recording.
pub const SYNTH_FPS: f64 = 30.0;

/// Nominal values `NOMINAL_OFFSET * truth`, pulled inside the bounds.
pub fn offset_nominal(spec: &SystemSpec, truth: &[f64]) -> Result<SystemSpec> {
    let nominal: Vec<f64> = truth
        .iter()
        .zip(spec.lower_bounds.iter().zip(&spec.upper_bounds))
        .map(|(t, (lo, hi))| (t * NOMINAL_OFFSET).clamp(*lo, *hi))
        .collect();
    spec.with_nominal(&nominal)
}

/// The headline quantity compared against the truth for each single-output
/// system. For the sliding block only the net acceleration is identifiable.
pub fn primary_quantity(spec: &SystemSpec, theta: &[f64]) -> Result<(String, f64)> {
    Ok(match spec.dynamics {
        Dynamics::SlidingBlock => (
            "a".into(),
            sliding_block_acceleration(theta[0], theta[1], spec.constant("g")?),
        ),
        _ => (spec.param_names[0].clone(), theta[0]),
    })
}

/// Incline and friction giving net acceleration `a` on a 25 degree slope.
pub fn sliding_block_truth(a: f64, g: f64) -> [f64; 2] {
    let alpha = 25f64.to_radians();
    [25.0, (alpha.sin() - a / g) / alpha.cos()]
}

/// Default parameters for single-quantity recovery of `system` with the
/// headline quantity set to `value`.
pub fn recovery_truth(system: &str, value: f64) -> Result<Vec<f64>> {
    let spec = registry_lookup(system)?;
    Ok(match spec.dynamics {
        Dynamics::Pendulum => vec![value, 0.05],
        Dynamics::SlidingBlock => sliding_block_truth(value, spec.constant("g")?).to_vec(),
        _ => {
            let mut t = spec.theta_nominal.clone();
            t[0] = value;
            t
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recovery {
    pub system: String,
    pub truth: Vec<f64>,
    /// Observation noise as a fraction of each channel's range.
    pub noise_fraction: f64,
    pub duration: Option<f64>,
    pub data_seed: u64,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub report: EstimateReport,
    pub quantity: String,
    pub truth: f64,
    pub estimate: f64,
    pub rel_error: f64,
}

pub fn run_recovery(r: &Recovery) -> Result<RecoveryResult> {
    let base = registry_lookup(&r.system)?;
    let (x0, default_duration) = default_setup(&base);
    let duration = r.duration.unwrap_or(default_duration);
    let forcing = default_forcing(&base, duration);
    let mut rng = ChaCha8Rng::seed_from_u64(r.data_seed);
    let obs = synthesize(
        &base,
        &r.truth,
        &x0,
        forcing.as_ref(),
        duration,
        SYNTH_FPS,
        r.noise_fraction,
        &mut rng,
    )?;
    let spec = offset_nominal(&base, &r.truth)?;
    let data = TrainData::from_observations(&spec, obs, forcing)?;
    let out = train(&spec, &data, &r.train)?;
    let report = out.report.with_ground_truth(&r.truth)?;
    let (quantity, truth) = primary_quantity(&spec, &r.truth)?;
    let (_, estimate) = primary_quantity(&spec, &report.theta_hat.values)?;
    Ok(RecoveryResult {
        report,
        quantity,
        truth,
        estimate,
        rel_error: (estimate - truth).abs() / truth.abs(),
    })
}

/// Pendulum seen through a camera whose angle reading carries a constant
/// offset. The angle channel is declared calibrated; `calibration` switches
/// the readout's extra cells on or off.
pub fn run_offset_ablation(
    length: f64,
    bias: f64,
    calibration: bool,
    data_seed: u64,
    train_cfg: &TrainConfig,
) -> Result<RecoveryResult> {
    let base = registry_lookup("pendulum")?;
    let truth = vec![length, 0.05];
    let (x0, duration) = default_setup(&base);
    let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
    let clean = synthesize(&base, &truth, &x0, None, duration, SYNTH_FPS, 0.0, &mut rng)?;
    let states = clean
        .states()
        .iter()
        .map(|r| vec![r[0] + bias, r[1]])
        .collect();
    let obs = Trajectory::new(clean.timestamps().to_vec(), states, None)?.with_fps(SYNTH_FPS);
    let mut spec = offset_nominal(&base, &truth)?;
    spec.calibrated_channels = vec![true, false];
    let data = TrainData::from_observations(&spec, obs, None)?;
    let cfg = TrainConfig {
        calibration,
        ..train_cfg.clone()
    };
    let report = train(&spec, &data, &cfg)?
        .report
        .with_ground_truth(&truth)?;
    let estimate = report.theta_hat.values[0];
    Ok(RecoveryResult {
        report,
        quantity: "L".into(),
        truth: length,
        estimate,
        rel_error: (estimate - length).abs() / length,
    })
}

/// Synthetic rover whose wheel speeds reach the model only through two
/// tones in one audio track, one frequency band per wheel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoverAudio {
    pub duration: f64,
    pub priors: [AudioPrior; 2],
    pub bands: [(f64, f64); 2],
    /// Signal-to-noise ratio of added white noise, if any.
    pub snr_db: Option<f64>,
    /// When false the wheel-speed forcing channels are zeroed.
    pub use_audio: bool,
    pub data_seed: u64,
    pub train: TrainConfig,
}

impl Default for RoverAudio {
    fn default() -> Self {
        Self {
            duration: 12.0,
            priors: [
                AudioPrior {
                    alpha: 100.0,
                    beta: 300.0,
                },
                AudioPrior {
                    alpha: 100.0,
                    beta: 4000.0,
                },
            ],
            bands: [(300.0, 2500.0), (3000.0, 7000.0)],
            snr_db: None,
            use_audio: true,
            data_seed: 11,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoverAudioResult {
    pub report: EstimateReport,
    /// RMSE of the audio-derived wheel speeds relative to their range.
    pub speed_rel_rmse: [f64; 2],
    pub r_error: f64,
    pub m_error: f64,
}

/// Wheel speeds recovered from the tone track, sampled at frame centres.
pub fn wheel_speeds_from_audio(cfg: &RoverAudio) -> Result<(Vec<f64>, [Vec<f64>; 2])> {
    let n = (cfg.duration * TARGET_RATE as f64).ceil() as usize + crate::ingest::FFT_SIZE;
    let [pr, pl] = cfg.priors;
    let fr = move |t: f64| pr.tone(rover_forcing(t)[0]);
    let fl = move |t: f64| pl.tone(rover_forcing(t)[1]);
    let mut audio = synth_tones(&[&fr, &fl], 0.4, TARGET_RATE, n);
    if let Some(snr) = cfg.snr_db {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.data_seed ^ 0xA0D10);
        audio = add_noise_snr(&audio, snr, &mut rng);
    }
    let (times, peaks) = band_peaks(&audio, TARGET_RATE, &cfg.bands)?;
    let r = apply_audio_prior(&peaks[0], cfg.priors[0])?;
    let l = apply_audio_prior(&peaks[1], cfg.priors[1])?;
    Ok((times, [r, l]))
}

pub fn run_rover_audio(cfg: &RoverAudio) -> Result<RoverAudioResult> {
    let base = registry_lookup("rover")?;
    let truth = base.theta_nominal.clone();
    let (x0, _) = default_setup(&base);
    let true_forcing = default_forcing(&base, cfg.duration).expect("rover is forced");
    let obs = simulate(
        &base,
        &x0,
        Some(&true_forcing),
        &truth,
        cfg.duration,
        SYNTH_FPS,
    )?;

    let (times, [wr, wl]) = wheel_speeds_from_audio(cfg)?;
    let speed_rel_rmse = [0, 1].map(|c| {
        let est = if c == 0 { &wr } else { &wl };
        let tru: Vec<f64> = times.iter().map(|&t| rover_forcing(t)[c]).collect();
        let lo = tru.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tru.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mse = est
            .iter()
            .zip(&tru)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / tru.len() as f64;
        mse.sqrt() / (hi - lo)
    });
    let values: Vec<Vec<f64>> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let power = rover_forcing(t)[2];
            if cfg.use_audio {
                vec![wr[k], wl[k], power]
            } else {
                vec![0.0, 0.0, power]
            }
        })
        .collect();
    let forcing = ForcingSignal::new(times, values)?;
    let obs = Trajectory::new(obs.timestamps().to_vec(), obs.states().to_vec(), None)?
        .with_fps(SYNTH_FPS);

    let spec = offset_nominal(&base, &truth)?;
    let data = TrainData::from_observations(&spec, obs, Some(forcing))?;
    let out = train(&spec, &data, &cfg.train)?;
    let report = out.report.with_ground_truth(&truth)?;
    let r_error = report.rel_error("r").expect("truth attached");
    let m_error = report.rel_error("m").expect("truth attached");
    Ok(RoverAudioResult {
        report,
        speed_rel_rmse,
        r_error,
        m_error,
    })
}

pub const CHART_WIDTH: u32 = 800;
pub const CHART_HEIGHT: u32 = 600;
const CHART_BOX: [f64; 4] = [50.0, 750.0, 50.0, 550.0];
const CURVE_COLORS: [[u8; 3]; 2] = [[220, 30, 30], [30, 30, 220]];

/// Renders the given series (one colour each) to a chart and reads them
/// back, resampled onto `k / fps` inside the common digitized span.
pub fn render_and_digitize(
    ts: &[f64],
    series: &[Vec<f64>],
    fps: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if series.len() > CURVE_COLORS.len() {
        return Err(Error::InvalidArgument(
            "at most two curves per chart".into(),
        ));
    }
    let lo = series
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = series
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (hi - lo);
    let calib = AxisCalibration::from_box(CHART_BOX, [ts[0], ts[ts.len() - 1], lo - pad, hi + pad]);
    let curves: Vec<Curve> = series
        .iter()
        .zip(CURVE_COLORS)
        .map(|(y, color)| Curve { t: ts, y, color })
        .collect();
    let img = render_chart(CHART_WIDTH, CHART_HEIGHT, &calib, &curves, 2);
    let digitized: Vec<Vec<(f64, f64)>> = CURVE_COLORS[..series.len()]
        .iter()
        .map(|&c| digitize_chart(&img, c, DEFAULT_COLOR_TOLERANCE, &calib))
        .collect::<Result<_>>()?;
    resample_digitized(&digitized, fps)
}

fn rel_rmse(est: &[f64], truth: &[f64]) -> f64 {
    let lo = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mse = est
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / truth.len() as f64;
    mse.sqrt() / (hi - lo)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartResult {
    pub report: EstimateReport,
    /// Digitized series against the rendered truth, per curve, relative to range.
    pub digitize_rel_rmse: Vec<f64>,
    /// Fitted model trajectory against the truth, per measured channel.
    pub reconstruction_rel_rmse: Vec<f64>,
    /// Root mean square parameter error.
    pub param_rmse: f64,
}

fn fit_digitized(
    spec: SystemSpec,
    truth: &[f64],
    grid: Vec<f64>,
    digitized: &[Vec<f64>],
    true_at: impl Fn(f64) -> Vec<f64>,
    train_cfg: &TrainConfig,
) -> Result<ChartResult> {
    let d = spec.state_dim();
    let states: Vec<Vec<f64>> = (0..grid.len())
        .map(|k| {
            let mut row = vec![0.0; d];
            for (c, s) in (0..d).filter(|&i| spec.measurement_mask[i]).zip(digitized) {
                row[c] = s[k];
            }
            row
        })
        .collect();
    let digitize_rel_rmse = (0..d)
        .filter(|&i| spec.measurement_mask[i])
        .zip(digitized)
        .map(|(c, s)| {
            let tru: Vec<f64> = grid.iter().map(|&t| true_at(t)[c]).collect();
            rel_rmse(s, &tru)
        })
        .collect();
    let obs = Trajectory::new(grid.clone(), states, None)?.with_fps(SYNTH_FPS);
    let data = TrainData::from_observations(&spec, obs, None)?;
    let out = train(&spec, &data, train_cfg)?;
    let report = out.report.with_ground_truth(truth)?;

    let duration = grid[grid.len() - 1] - grid[0];
    let fit = simulate(
        &spec,
        &report.x0,
        None,
        &report.theta_hat.values,
        duration,
        SYNTH_FPS,
    )?;
    let reconstruction_rel_rmse = (0..d)
        .filter(|&i| spec.measurement_mask[i])
        .map(|c| {
            let tru: Vec<f64> = fit
                .timestamps()
                .iter()
                .map(|&t| true_at(grid[0] + t)[c])
                .collect();
            rel_rmse(&fit.channel(c), &tru)
        })
        .collect();
    let param_rmse = (report
        .theta_hat
        .values
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / truth.len() as f64)
        .sqrt();
    Ok(ChartResult {
        report,
        digitize_rel_rmse,
        reconstruction_rel_rmse,
        param_rmse,
    })
}

/// Lotka-Volterra curves fitted after a round trip through a chart. With
/// `hide_predator` only the prey curve is drawn and the predator's initial
/// value is learned.
pub fn run_lotka_volterra_chart(
    hide_predator: bool,
    train_cfg: &TrainConfig,
) -> Result<ChartResult> {
    let base = registry_lookup("lotka_volterra")?;
    let truth = base.theta_nominal.clone();
    let (x0, duration) = default_setup(&base);
    let fine = simulate(&base, &x0, None, &truth, duration, 200.0)?;
    let ts = fine.timestamps().to_vec();
    let series: Vec<Vec<f64>> = if hide_predator {
        vec![fine.channel(0)]
    } else {
        vec![fine.channel(0), fine.channel(1)]
    };
    let (grid, digitized) = render_and_digitize(&ts, &series, SYNTH_FPS)?;
    let mut spec = offset_nominal(&base, &truth)?;
    if hide_predator {
        spec.measurement_mask = vec![true, false];
        spec.learned_initial = vec![false, true];
    }
    let true_at = |t: f64| {
        fine.interpolate(&[t])
            .map(|tr| tr.states()[0].clone())
            .expect("inside span")
    };
    fit_digitized(spec, &truth, grid, &digitized, true_at, train_cfg)
}

/// A rendered cosine `A cos(w t)` digitized and fitted with the pendulum.
pub fn run_sine_chart(length: f64, amplitude: f64, train_cfg: &TrainConfig) -> Result<ChartResult> {
    let base = registry_lookup("pendulum")?;
    let g = base.constant("g")?;
    let w = (g / length).sqrt();
    let duration = 10.0;
    let ts: Vec<f64> = (0..=2000).map(|k| k as f64 * duration / 2000.0).collect();
    let y: Vec<f64> = ts.iter().map(|t| amplitude * (w * t).cos()).collect();
    let (grid, digitized) = render_and_digitize(&ts, &[y], SYNTH_FPS)?;
    let truth = [length, base.lower_bounds[1]];
    let spec = base.with_nominal(&[length * NOMINAL_OFFSET, 2.0 * base.lower_bounds[1]])?;
    let true_at = move |t: f64| vec![amplitude * (w * t).cos(), -amplitude * w * (w * t).sin()];
    fit_digitized(spec, &truth, grid, &digitized, true_at, train_cfg)
}
