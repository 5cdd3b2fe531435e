//! Finite-difference checks of the taped gradients along the training chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Session, TrainConfig, TrainData};
use crate::autodiff::{grad_check_with, primitive_suite, GradCheckReport, Real, ScalarFn, Stencil};
use crate::dynamics::{registry_lookup, Dynamics, ForcingSignal, SystemSpec, BUILTIN_NAMES};
use crate::integrator::{integrate, simulate};
use crate::ltcnet::{denormalize, LtcConfig, LtcModel};
use crate::objective::{combine, param_penalty, traj_loss, PenaltyWeights};
use crate::Result;

/// Outcome of one finite-difference comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub scope: String,
    pub name: String,
    pub coords: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// True when a kink made the point non-differentiable.
    pub excluded: bool,
}

impl CheckResult {
    fn from_report(
        scope: &str,
        name: impl Into<String>,
        rep: &GradCheckReport,
        tolerance: f64,
    ) -> Self {
        Self {
            scope: scope.into(),
            name: name.into(),
            coords: rep.coords.len(),
            max_rel_error: rep.max_rel_error,
            tolerance,
            excluded: rep.excluded,
        }
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub const PRIMITIVE_TOL: f64 = 1e-6;
pub const CHAIN_TOL: f64 = 1e-4;
pub const LOSS_TOL: f64 = 1e-5;

/// Every tape primitive at `points` random arguments.
pub fn check_primitives(points: usize, seed: u64) -> Vec<CheckResult> {
    primitive_suite(points, seed, 1e-6)
        .into_iter()
        .map(|c| CheckResult {
            scope: "primitive".into(),
            name: format!("{:?}", c.prim),
            coords: c.points,
            max_rel_error: c.max_rel_error,
            tolerance: PRIMITIVE_TOL,
            excluded: false,
        })
        .collect()
}

/// A state inside each system's physical range, used as a probe point.
pub fn probe_state(spec: &SystemSpec) -> Vec<f64> {
    match spec.dynamics {
        Dynamics::Pendulum => vec![0.5, 0.1],
        Dynamics::Torricelli => vec![0.04],
        Dynamics::Led => vec![1.0],
        Dynamics::SlidingBlock => vec![0.2],
        Dynamics::FreeFall => vec![0.5],
        Dynamics::Rover => vec![0.0, 0.0, 0.1, 1.0],
        Dynamics::Rotor => vec![0.5, 0.0],
        Dynamics::LotkaVolterra => vec![10.0, 5.0],
        Dynamics::Lorenz => vec![1.0, 1.0, 1.0],
    }
}

/// Oscillating actuation for systems that need forcing, so the state stays
/// sensitive to every parameter.
pub fn probe_forcing(spec: &SystemSpec) -> Option<ForcingSignal> {
    let ts: Vec<f64> = (0..=200).map(|k| k as f64 * 0.005).collect();
    let rows = |f: &dyn Fn(f64) -> Vec<f64>| ts.iter().map(|&t| f(t)).collect::<Vec<_>>();
    let values = match spec.dynamics {
        Dynamics::Rover => rows(&|t| {
            vec![
                10.0 + 2.0 * (3.0 * t).sin(),
                8.0,
                20.0 + 5.0 * (5.0 * t).cos(),
            ]
        }),
        Dynamics::Rotor => rows(&|t| vec![1.0 + 0.5 * (20.0 * t).sin()]),
        _ => return None,
    };
    Some(ForcingSignal::new(ts, values).expect("valid probe forcing"))
}

struct FinalState<'a> {
    spec: &'a SystemSpec,
    x0: Vec<f64>,
    forcing: Option<ForcingSignal>,
    component: usize,
    dt: f64,
    steps: usize,
}

impl ScalarFn for FinalState<'_> {
    fn eval<R: Real>(&self, theta: &[R]) -> Result<R> {
        let x0: Vec<R> = self.x0.iter().map(|&v| R::cst(v)).collect();
        let r = integrate(
            self.spec,
            &x0,
            self.forcing.as_ref(),
            theta,
            0.0,
            self.dt,
            self.steps,
        )?;
        Ok(r.final_state()[self.component])
    }
}

/// d(final state)/d(theta) at nominal parameters for every built-in system.
pub fn check_rollouts() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for name in BUILTIN_NAMES {
        let spec = registry_lookup(name)?;
        let theta = spec.theta_nominal.clone();
        let h = theta.iter().map(|t| t.abs()).fold(0.0, f64::max).max(1.0) * 1e-6;
        let mut worst: Option<GradCheckReport> = None;
        for component in 0..spec.state_dim() {
            let f = FinalState {
                spec: &spec,
                x0: probe_state(&spec),
                forcing: probe_forcing(&spec),
                component,
                dt: 0.01,
                steps: 50,
            };
            let rep = grad_check_with(&f, &theta, h, Stencil::FivePoint)?;
            if worst
                .as_ref()
                .is_none_or(|w| rep.max_rel_error > w.max_rel_error)
            {
                worst = Some(rep);
            }
        }
        out.push(CheckResult::from_report(
            "rollout",
            name,
            &worst.expect("non-empty state"),
            CHAIN_TOL,
        ));
    }
    Ok(out)
}

struct LossFn {
    measured: Vec<Vec<f64>>,
    mask: Vec<bool>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    steps: usize,
    dim: usize,
}

impl ScalarFn for LossFn {
    /// `x` = simulated states (row-major), then offsets, then parameters.
    fn eval<R: Real>(&self, x: &[R]) -> Result<R> {
        let (sim, rest) = x.split_at(self.steps * self.dim);
        let (gamma, theta) = rest.split_at(self.dim);
        let sim: Vec<Vec<R>> = sim.chunks(self.dim).map(|c| c.to_vec()).collect();
        let traj = traj_loss(&self.measured, &sim, &self.mask, gamma)?;
        let pen = param_penalty(
            theta,
            &self.lower,
            &self.upper,
            &PenaltyWeights::uniform(theta.len(), 10.0),
        )?;
        Ok(combine(traj, pen, 1.0))
    }
}

/// Trajectory loss plus penalty with parameters on both sides of the box.
pub fn check_loss(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (steps, dim) = (20, 3);
    let f = LossFn {
        measured: (0..steps)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
        mask: vec![true, false, true],
        lower: vec![0.5, 0.5, 0.5, 0.5],
        upper: vec![1.5, 1.5, 1.5, 1.5],
        steps,
        dim,
    };
    let mut x: Vec<f64> = (0..steps * dim + dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    x.extend([0.2, 0.9, 1.3, 2.1]);
    let rep = grad_check_with(&f, &x, 1e-5, Stencil::ThreePoint)?;
    Ok(vec![CheckResult::from_report(
        "loss",
        "traj+penalty",
        &rep,
        LOSS_TOL,
    )])
}

struct LtcFn<'a> {
    model: &'a LtcModel,
    xs: Vec<Vec<f64>>,
    nominal: Vec<f64>,
    c_theta: Vec<f64>,
    c_calib: Vec<f64>,
}

impl ScalarFn for LtcFn<'_> {
    fn eval<R: Real>(&self, w: &[R]) -> Result<R> {
        let r = self.model.forward_with(w, &self.xs, None)?;
        let theta = denormalize(&r.theta_bar, &self.nominal)?;
        Ok(R::dot_const(&theta, &self.c_theta) + R::dot_const(&r.calib, &self.c_calib))
    }
}

/// The network up to denormalization, with respect to every weight.
pub fn check_ltc(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = LtcConfig::new(2, 4);
    let model = LtcModel::new(cfg.clone(), &mut rng)?;
    let xs: Vec<Vec<f64>> = (0..8)
        .map(|_| {
            (0..cfg.input)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let f = LtcFn {
        model: &model,
        xs,
        nominal: vec![0.9, 0.05],
        c_theta: vec![1.3, -20.0],
        c_calib: (0..cfg.n_calib)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    };
    let rep = grad_check_with(&f, model.weights(), 1e-4, Stencil::FivePoint)?;
    Ok(vec![CheckResult::from_report(
        "ltc",
        "unfold+readout+denormalize",
        &rep,
        CHAIN_TOL,
    )])
}

struct ChainFn<'a> {
    session: &'a Session,
    model: &'a LtcModel,
}

impl ScalarFn for ChainFn<'_> {
    fn eval<R: Real>(&self, w: &[R]) -> Result<R> {
        self.session.batch_loss(self.model, w, &[0], None)
    }
}

/// Network, denormalization, rollout and loss on a 16-step pendulum window,
/// with respect to all trainable weights.
pub fn check_full_chain(seed: u64) -> Result<Vec<CheckResult>> {
    let spec = registry_lookup("pendulum")?;
    let fps = 30.0;
    let obs = simulate(&spec, &[0.4, 0.0], None, &[0.85, 0.08], 16.0 / fps, fps)?;
    let data = TrainData::from_observations(&spec, obs, None)?;
    let cfg = TrainConfig {
        window: 16,
        seed,
        ..TrainConfig::default()
    };
    let session = Session::new(&spec, &data, &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = LtcModel::new(session.model_config(&cfg), &mut rng)?;
    let f = ChainFn {
        session: &session,
        model: &model,
    };
    let rep = grad_check_with(&f, model.weights(), 1e-4, Stencil::FivePoint)?;
    Ok(vec![CheckResult::from_report(
        "full",
        "pendulum window",
        &rep,
        CHAIN_TOL,
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_and_rollouts() {
        for r in check_loss(1)
            .unwrap()
            .into_iter()
            .chain(check_rollouts().unwrap())
        {
            assert!(r.passed() && !r.excluded, "{r:?}");
        }
    }
}
