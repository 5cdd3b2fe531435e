use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainData};
use crate::autodiff::Real;
use crate::dynamics::{ForcingSignal, SystemSpec};
use crate::integrator::{integrate, MAX_DT, MAX_STEPS};
use crate::ltcnet::denormalize;
use crate::objective::{combine, param_penalty, traj_loss, PenaltyWeights};
use crate::{Error, Result};

/// Which calibration outputs drive which invariants. Each invariant uses a
/// pair of ReLU outputs, `(c+ - c-) * scale`, so it can take either sign.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibLayout {
    /// Channels with a trajectory offset.
    pub offsets: Vec<usize>,
    /// Unmeasured channels with a learned initial value.
    pub initial: Vec<usize>,
}

impl CalibLayout {
    pub fn for_spec(spec: &SystemSpec, enabled: bool) -> Self {
        if !enabled {
            return Self::default();
        }
        let d = spec.state_dim();
        Self {
            offsets: (0..d)
                .filter(|&i| spec.measurement_mask[i] && spec.is_calibrated(i))
                .collect(),
            initial: (0..d).filter(|&i| spec.has_learned_initial(i)).collect(),
        }
    }

    pub fn n_outputs(&self) -> usize {
        2 * (self.offsets.len() + self.initial.len())
    }
}

/// Physics side of the objective: rollout against the observations on the
/// simulation grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: SystemSpec,
    pub forcing: Option<ForcingSignal>,
    /// Observations interpolated onto the grid (`T_sim x D`).
    pub measured: Vec<Vec<f64>>,
    pub t0: f64,
    pub dt: f64,
    pub calib: CalibLayout,
    /// Per-channel scale of the calibration invariants.
    pub scale: Vec<f64>,
    pub lambda_param: f64,
    pub weights: PenaltyWeights,
}

/// Result of one objective evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation<R> {
    pub theta: Vec<R>,
    pub gamma: Vec<R>,
    pub x0: Vec<R>,
    pub traj: R,
    pub penalty: R,
    pub total: R,
}

impl Problem {
    pub fn new(spec: &SystemSpec, data: &TrainData, cfg: &TrainConfig) -> Result<Self> {
        spec.validate()?;
        let obs = &data.observations;
        if obs.state_dim() != spec.state_dim() {
            return Err(Error::Dimension {
                what: "observation columns",
                expected: spec.state_dim(),
                got: obs.state_dim(),
            });
        }
        if obs.len() < 2 {
            return Err(Error::TooShort {
                need: 2,
                got: obs.len(),
            });
        }
        if spec.forcing_dim > 0 {
            match &data.forcing {
                Some(f) if f.dim() == spec.forcing_dim => {}
                Some(f) => {
                    return Err(Error::Dimension {
                        what: "forcing channels",
                        expected: spec.forcing_dim,
                        got: f.dim(),
                    })
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "system '{}' needs forcing",
                        spec.name
                    )))
                }
            }
        }
        let fps = obs.fps().ok_or(Error::TooShort {
            need: 2,
            got: obs.len(),
        })?;
        let dt = MAX_DT.min(1.0 / fps);
        let ts = obs.timestamps();
        let t0 = ts[0];
        let span = ts[ts.len() - 1] - t0;
        let fit_in_span = (span / dt + 1e-9).floor() as usize + 1;
        let t_sim = obs.len().min(MAX_STEPS).min(fit_in_span);
        if t_sim < 2 {
            return Err(Error::TooShort {
                need: 2,
                got: t_sim,
            });
        }
        let grid: Vec<f64> = (0..t_sim).map(|k| t0 + k as f64 * dt).collect();
        let measured = obs.interpolate(&grid)?.states().to_vec();

        let d = spec.state_dim();
        let measured_idx: Vec<usize> = (0..d).filter(|&i| spec.measurement_mask[i]).collect();
        let magnitude = measured
            .iter()
            .flat_map(|r| measured_idx.iter().map(move |&i| r[i].abs()))
            .sum::<f64>()
            / (measured.len() * measured_idx.len()).max(1) as f64;
        let scale = (0..d)
            .map(|i| {
                if !spec.measurement_mask[i] {
                    // unmeasured states are assumed to live on the measured scale
                    return if magnitude > 1e-8 { magnitude } else { 1.0 };
                }
                let n = measured.len() as f64;
                let m = measured.iter().map(|r| r[i]).sum::<f64>() / n;
                let s = (measured.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / n).sqrt();
                if s > 1e-8 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            forcing: data.forcing.clone(),
            measured,
            t0,
            dt,
            calib: CalibLayout::for_spec(spec, cfg.calibration),
            scale,
            lambda_param: cfg.lambda_param,
            weights: PenaltyWeights::uniform(spec.param_count(), cfg.penalty_weight),
        })
    }

    pub fn t_sim(&self) -> usize {
        self.measured.len()
    }

    pub fn n_calib(&self) -> usize {
        self.calib.n_outputs()
    }

    fn pair<R: Real>(&self, calib: &[R], slot: usize, channel: usize) -> R {
        (calib[2 * slot] - calib[2 * slot + 1]) * self.scale[channel]
    }

    /// Per-channel offsets; zero where the channel is not calibrated.
    pub fn offsets<R: Real>(&self, calib: &[R]) -> Vec<R> {
        let mut g = vec![R::cst(0.0); self.spec.state_dim()];
        for (slot, &ch) in self.calib.offsets.iter().enumerate() {
            g[ch] = self.pair(calib, slot, ch);
        }
        g
    }

    /// First observation minus offsets on measured channels; learned or zero
    /// values elsewhere. Learned values of non-negative states start at the
    /// channel scale and are folded onto the positive half-line.
    pub fn initial_state<R: Real>(&self, calib: &[R], gamma: &[R]) -> Vec<R> {
        let d = self.spec.state_dim();
        let mut x0: Vec<R> = (0..d)
            .map(|i| {
                if self.spec.measurement_mask[i] {
                    -gamma[i] + self.measured[0][i]
                } else {
                    R::cst(0.0)
                }
            })
            .collect();
        let base = self.calib.offsets.len();
        let positive = self.spec.dynamics.nonnegative_states();
        for (k, &ch) in self.calib.initial.iter().enumerate() {
            let v = self.pair(calib, base + k, ch);
            x0[ch] = if positive {
                (v + R::cst(self.scale[ch])).abs()
            } else {
                v
            };
        }
        x0
    }

    /// Denormalize, roll out from the calibrated initial state and score.
    pub fn evaluate<R: Real>(&self, theta_bar: &[R], calib: &[R]) -> Result<Evaluation<R>> {
        if calib.len() != self.n_calib() {
            return Err(Error::Dimension {
                what: "calibration outputs",
                expected: self.n_calib(),
                got: calib.len(),
            });
        }
        let theta = denormalize(theta_bar, &self.spec.theta_nominal)?;
        let gamma = self.offsets(calib);
        let x0 = self.initial_state(calib, &gamma);
        let sim = integrate(
            &self.spec,
            &x0,
            self.forcing.as_ref(),
            &theta,
            self.t0,
            self.dt,
            self.t_sim() - 1,
        )?;
        let traj = traj_loss(
            &self.measured,
            &sim.states,
            &self.spec.measurement_mask,
            &gamma,
        )?;
        let penalty = param_penalty(
            &theta,
            &self.spec.lower_bounds,
            &self.spec.upper_bounds,
            &self.weights,
        )?;
        let total = combine(traj, penalty, self.lambda_param);
        Ok(Evaluation {
            theta,
            gamma,
            x0,
            traj,
            penalty,
            total,
        })
    }
}
