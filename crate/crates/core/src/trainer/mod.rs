//! Training loop: windows of standardized features go through the LTC
//! network, the time-averaged readout is denormalized into physical
//! parameters, and the physics rollout scores them against the observations.

pub mod check;
mod data;
mod optim;
mod problem;
mod report;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use data::{make_windows, network_inputs, spatial_of, TrainData, ZScore, STD_GUARD};
pub use optim::{adamw_step, cosine_lr, AdamState, StepOutcome};
pub use problem::{CalibLayout, Evaluation, Problem};
pub use report::{summarize_seeds, EpochRecord, EstimateReport, ParamError, SeedSummary};

use crate::autodiff::{Real, Tape};
use crate::dynamics::{ParamVector, SystemSpec};
use crate::ltcnet::{dropout_mask, LtcConfig, LtcModel, INPUT_DIM};
use crate::objective::{total_loss, LossBreakdown};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub window: usize,
    pub stride: usize,
    pub batch: usize,
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub t0: usize,
    pub t_mult: usize,
    pub eta_min: f64,
    pub dropout: f64,
    pub seed: u64,
    pub max_epochs: usize,
    /// Smallest drop in trajectory loss that counts as an improvement.
    pub min_delta: f64,
    pub lambda_param: f64,
    pub penalty_weight: f64,
    /// Whether the calibration head drives the system's declared invariants.
    pub calibration: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 16,
            stride: 1,
            batch: 32,
            patience: 40,
            lr: 5e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            t0: 10,
            t_mult: 2,
            eta_min: 1e-6,
            dropout: 0.3,
            seed: 42,
            max_epochs: 500,
            min_delta: 0.0,
            lambda_param: crate::objective::DEFAULT_LAMBDA_PARAM,
            penalty_weight: crate::objective::DEFAULT_PENALTY_WEIGHT,
            calibration: true,
        }
    }
}

impl TrainConfig {
    /// `key = value` for every field that differs from the defaults.
    pub fn overrides(&self) -> Vec<String> {
        let cur = serde_json::to_value(self).expect("config serializes");
        let def = serde_json::to_value(Self::default()).expect("config serializes");
        let (Some(cur), Some(def)) = (cur.as_object(), def.as_object()) else {
            return Vec::new();
        };
        cur.iter()
            .filter(|(k, v)| def.get(*k) != Some(v))
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.window == 0 || self.stride == 0 || self.batch == 0 {
            return bad("window, stride and batch must be positive");
        }
        if self.t0 == 0 || self.t_mult == 0 {
            return bad("t0 and t_mult must be positive");
        }
        if !(self.lr > 0.0) || !(self.eta_min >= 0.0) || self.eta_min > self.lr {
            return bad("need 0 <= eta_min <= lr and lr > 0");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.lambda_param >= 0.0) || !(self.penalty_weight >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        Ok(())
    }
}

/// Prepared inputs shared by training and evaluation.
pub struct Session {
    pub problem: Problem,
    pub zscore: ZScore,
    /// Network input rows (`T x 100`).
    pub inputs: Vec<Vec<f64>>,
    /// Start row of every window.
    pub starts: Vec<usize>,
    pub window: usize,
}

impl Session {
    pub fn new(spec: &SystemSpec, data: &TrainData, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let problem = Problem::new(spec, data, cfg)?;
        let zscore = ZScore::fit(&data.features);
        let inputs = network_inputs(&data.features, &data.spatial, &zscore, INPUT_DIM);
        let starts = make_windows(&inputs, cfg.window, cfg.stride)?
            .iter()
            .enumerate()
            .map(|(k, _)| k * cfg.stride)
            .collect();
        Ok(Self {
            problem,
            zscore,
            inputs,
            starts,
            window: cfg.window,
        })
    }

    pub fn window(&self, k: usize) -> &[Vec<f64>] {
        let s = self.starts[k];
        &self.inputs[s..s + self.window]
    }

    pub fn model_config(&self, cfg: &TrainConfig) -> LtcConfig {
        LtcConfig {
            dropout: cfg.dropout,
            ..LtcConfig::new(self.problem.spec.param_count(), self.problem.n_calib())
        }
    }

    /// Mean readout over the given windows, without dropout.
    pub fn mean_readout(
        &self,
        model: &LtcModel,
        windows: &[usize],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let cfg = model.config();
        let mut tb = vec![0.0; cfg.n_params];
        let mut c = vec![0.0; cfg.n_calib];
        for &k in windows {
            let r = model.forward(self.window(k), None)?;
            add(&mut tb, &r.theta_bar);
            add(&mut c, &r.calib);
        }
        let n = windows.len() as f64;
        tb.iter_mut().for_each(|v| *v /= n);
        c.iter_mut().for_each(|v| *v /= n);
        Ok((tb, c))
    }

    /// Objective at the model's mean readout over all windows.
    pub fn evaluate(&self, model: &LtcModel) -> Result<(Vec<f64>, Vec<f64>, Evaluation<f64>)> {
        let all: Vec<usize> = (0..self.starts.len()).collect();
        let (tb, c) = self.mean_readout(model, &all)?;
        let ev = self.problem.evaluate(&tb, &c)?;
        Ok((tb, c, ev))
    }

    /// Loss and weight gradient for one batch. The physics part is taped on
    /// the batch-mean readout; its gradient then seeds the per-window
    /// reverse pass through the network.
    pub fn batch_gradient(
        &self,
        model: &LtcModel,
        windows: &[usize],
        masks: Option<&[Vec<Vec<f64>>]>,
        grad: &mut [f64],
    ) -> Result<Evaluation<f64>> {
        let cfg = model.config();
        let n = windows.len() as f64;
        let mut tb = vec![0.0; cfg.n_params];
        let mut c = vec![0.0; cfg.n_calib];
        for (j, &k) in windows.iter().enumerate() {
            let r = model.forward(self.window(k), masks.map(|m| m[j].as_slice()))?;
            add(&mut tb, &r.theta_bar);
            add(&mut c, &r.calib);
        }
        tb.iter_mut().for_each(|v| *v /= n);
        c.iter_mut().for_each(|v| *v /= n);

        let tape = Tape::new();
        let tb_v = tape.vars(&tb);
        let c_v = tape.vars(&c);
        let ev = self.problem.evaluate(&tb_v, &c_v)?;
        let g = tape.backward(ev.total);
        let g_tb: Vec<f64> = g.wrt_all(&tb_v).iter().map(|v| v / n).collect();
        let g_c: Vec<f64> = g.wrt_all(&c_v).iter().map(|v| v / n).collect();
        let plain = Evaluation {
            theta: ev.theta.iter().map(|v| v.value()).collect(),
            gamma: ev.gamma.iter().map(|v| v.value()).collect(),
            x0: ev.x0.iter().map(|v| v.value()).collect(),
            traj: ev.traj.value(),
            penalty: ev.penalty.value(),
            total: ev.total.value(),
        };
        drop(tape);

        grad.fill(0.0);
        for (j, &k) in windows.iter().enumerate() {
            model.forward_backward(
                self.window(k),
                masks.map(|m| m[j].as_slice()),
                &g_tb,
                &g_c,
                grad,
            )?;
        }
        Ok(plain)
    }

    /// The same objective as [`Session::batch_gradient`] evaluated with
    /// weights `w`, entirely on one scalar type. Used to check gradients.
    pub fn batch_loss<R: Real>(
        &self,
        model: &LtcModel,
        w: &[R],
        windows: &[usize],
        masks: Option<&[Vec<Vec<f64>>]>,
    ) -> Result<R> {
        let cfg = model.config();
        let inv_n = 1.0 / windows.len() as f64;
        let mut tb: Vec<Vec<R>> = vec![Vec::new(); cfg.n_params];
        let mut c: Vec<Vec<R>> = vec![Vec::new(); cfg.n_calib];
        for (j, &k) in windows.iter().enumerate() {
            let r = model.forward_with(w, self.window(k), masks.map(|m| m[j].as_slice()))?;
            for (acc, v) in tb.iter_mut().zip(r.theta_bar) {
                acc.push(v);
            }
            for (acc, v) in c.iter_mut().zip(r.calib) {
                acc.push(v);
            }
        }
        let tb: Vec<R> = tb.iter().map(|s| R::sum(s) * inv_n).collect();
        let c: Vec<R> = c.iter().map(|s| R::sum(s) * inv_n).collect();
        Ok(self.problem.evaluate(&tb, &c)?.total)
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// A finished run: the report plus the best model.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: EstimateReport,
    pub model: LtcModel,
    pub zscore: ZScore,
}

/// Non-finite batch losses in a row that abort training.
const DIVERGENCE_LIMIT: usize = 2;

pub fn train(spec: &SystemSpec, data: &TrainData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let started = Instant::now();
    let session = Session::new(spec, data, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LtcModel::new(session.model_config(cfg), &mut rng)?;
    let mut adam = AdamState::new(model.num_weights());
    let mut grad = vec![0.0; model.num_weights()];
    let hidden = model.config().hidden;

    let mut order: Vec<usize> = (0..session.starts.len()).collect();
    let mut curve: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut non_finite_run = 0usize;
    let mut skipped_steps = 0usize;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let lr = cosine_lr(epoch, cfg);
        order.shuffle(&mut rng);
        let mut batch_totals = Vec::new();
        for batch in order.chunks(cfg.batch) {
            let masks: Vec<Vec<Vec<f64>>> = batch
                .iter()
                .map(|_| dropout_mask(&mut rng, session.window, hidden, cfg.dropout))
                .collect();
            let masks = (cfg.dropout > 0.0).then_some(masks.as_slice());
            let loss = match session.batch_gradient(&model, batch, masks, &mut grad) {
                Ok(ev) if ev.total.is_finite() => Some(ev.total),
                Ok(_) | Err(Error::NonFinite { .. }) | Err(Error::NonFiniteHidden { .. }) => None,
                Err(e) => return Err(e),
            };
            let Some(loss) = loss else {
                non_finite_run += 1;
                if non_finite_run >= DIVERGENCE_LIMIT {
                    return Err(Error::Divergence {
                        epoch,
                        reason: format!("{DIVERGENCE_LIMIT} consecutive non-finite losses"),
                    });
                }
                continue;
            };
            match adamw_step(model.weights_mut(), &grad, &mut adam, cfg, lr)? {
                StepOutcome::Applied => non_finite_run = 0,
                StepOutcome::SkippedNonFinite => {
                    skipped_steps += 1;
                    non_finite_run += 1;
                    if non_finite_run >= DIVERGENCE_LIMIT {
                        return Err(Error::Divergence {
                            epoch,
                            reason: "non-finite gradients".into(),
                        });
                    }
                }
            }
            batch_totals.push(loss);
        }

        let eval = match session.evaluate(&model) {
            Ok((tb, _, ev)) => Some((tb, ev)),
            Err(Error::NonFinite { .. }) | Err(Error::NonFiniteHidden { .. }) => None,
            Err(e) => return Err(e),
        };
        let (breakdown, theta) = match &eval {
            Some((_, ev)) => (
                total_loss(ev.traj, ev.penalty, cfg.lambda_param)?,
                ev.theta.clone(),
            ),
            None => (
                LossBreakdown {
                    traj: f64::INFINITY,
                    param_penalty: f64::INFINITY,
                    total: f64::INFINITY,
                    lambda_param: cfg.lambda_param,
                },
                Vec::new(),
            ),
        };
        let train_loss = if batch_totals.is_empty() {
            f64::NAN
        } else {
            batch_totals.iter().sum::<f64>() / batch_totals.len() as f64
        };
        let improved = match &best {
            None => breakdown.traj.is_finite(),
            Some((b, _, _)) => breakdown.traj < b - cfg.min_delta,
        };
        if improved {
            best = Some((breakdown.traj, epoch, model.weights().to_vec()));
        }
        let best_traj = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        curve.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            eval: breakdown,
            best_traj,
            theta,
        });
        let best_epoch = best.as_ref().map_or(0, |b| b.1);
        if epoch - best_epoch >= cfg.patience {
            stopped_early = true;
            break;
        }
    }

    let (_, best_epoch, best_w) = best.ok_or_else(|| Error::Divergence {
        epoch: curve.len(),
        reason: "no finite evaluation loss".into(),
    })?;
    let best_model = LtcModel::from_weights(model.config().clone(), best_w)?;
    let (tb, c, ev) = session.evaluate(&best_model)?;
    let report = EstimateReport {
        system: spec.name.clone(),
        theta_hat: ParamVector::new(spec, ev.theta.clone())?,
        units: spec.units.params.clone(),
        theta_bar: tb,
        calib_raw: c,
        gamma: ev.gamma.clone(),
        x0: ev.x0.clone(),
        best_loss: total_loss(ev.traj, ev.penalty, cfg.lambda_param)?,
        best_epoch,
        epochs_run: curve.len(),
        stopped_early,
        skipped_steps,
        seed: cfg.seed,
        config: cfg.clone(),
        overrides: cfg.overrides(),
        loss_curve: curve,
        errors: None,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        report,
        model: best_model,
        zscore: session.zscore,
    })
}
