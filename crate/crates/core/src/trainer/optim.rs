use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::{Error, Result};

/// Warm-restart cosine schedule: cycles of length `T0`, `T0 * T_mult`, ...
pub fn cosine_lr(epoch: usize, cfg: &TrainConfig) -> f64 {
    let mut t_cur = epoch as f64;
    let mut t_i = cfg.t0 as f64;
    while t_cur >= t_i {
        t_cur -= t_i;
        t_i *= cfg.t_mult as f64;
    }
    cfg.eta_min + (cfg.lr - cfg.eta_min) * (1.0 + (std::f64::consts::PI * t_cur / t_i).cos()) / 2.0
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// What an optimizer step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient entry was non-finite; nothing changed.
    SkippedNonFinite,
}

/// AdamW with decoupled weight decay:
/// `w <- w - lr (m_hat / (sqrt(v_hat) + eps) + weight_decay w)`.
pub fn adamw_step(
    weights: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<StepOutcome> {
    if weights.len() != grads.len()
        || state.m.len() != weights.len()
        || state.v.len() != weights.len()
    {
        return Err(Error::Dimension {
            what: "optimizer state",
            expected: weights.len(),
            got: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Ok(StepOutcome::SkippedNonFinite);
    }
    state.step += 1;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..weights.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        weights[i] -= lr * (m_hat / (v_hat.sqrt() + cfg.adam_eps) + cfg.weight_decay * weights[i]);
    }
    Ok(StepOutcome::Applied)
}
