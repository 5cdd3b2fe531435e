//! Fixed-step RK4 simulation of registered systems, generic over [`Real`] so
//! the same rollout runs in plain f64 or on a tape.

mod trajectory;

pub use trajectory::{read_csv_trajectory, write_csv_trajectory, write_csv_with_names, Trajectory};

use crate::autodiff::Real;
use crate::dynamics::{soft_clamp, ForcingSignal, SystemSpec};
use crate::{Error, Result};

/// Longest simulation step, in seconds.
pub const MAX_DT: f64 = 0.03;
/// Most states a rollout produces.
pub const MAX_STEPS: usize = 500;

/// `(T_sim, dt)` for `t_obs` observed samples at `fps`.
pub fn rollout_grid(t_obs: usize, fps: f64) -> Result<(usize, f64)> {
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "fps must be positive, got {fps}"
        )));
    }
    Ok((t_obs.min(MAX_STEPS), MAX_DT.min(1.0 / fps)))
}

fn check<R: Real>(v: &[R], step: usize, stage: &'static str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(component) => Err(Error::NonFinite {
            step,
            component,
            stage,
        }),
        None => Ok(()),
    }
}

fn axpy<R: Real>(x: &[R], k: &[R], h: f64) -> Vec<R> {
    x.iter().zip(k).map(|(&a, &b)| a + b * h).collect()
}

/// One classical RK4 step from `x` at time `t`.
///
/// `u_t`, `u_half` and `u_next` are the forcing at `t`, `t + dt/2` and
/// `t + dt`. `theta` is used as given (see [`soft_clamp`]). `step` only
/// labels diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn rk4_step<R: Real>(
    spec: &SystemSpec,
    x: &[R],
    u_t: &[f64],
    u_half: &[f64],
    u_next: &[f64],
    t: f64,
    dt: f64,
    theta: &[R],
    step: usize,
) -> Result<Vec<R>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let k1 = spec.rhs(x, u_t, theta, t)?;
    check(&k1, step, "k1")?;
    let k2 = spec.rhs(&axpy(x, &k1, dt / 2.0), u_half, theta, t + dt / 2.0)?;
    check(&k2, step, "k2")?;
    let k3 = spec.rhs(&axpy(x, &k2, dt / 2.0), u_half, theta, t + dt / 2.0)?;
    check(&k3, step, "k3")?;
    let k4 = spec.rhs(&axpy(x, &k3, dt), u_next, theta, t + dt)?;
    check(&k4, step, "k4")?;
    let next: Vec<R> = (0..x.len())
        .map(|i| x[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
        .collect();
    check(&next, step, "state")?;
    Ok(next)
}

/// Simulated states on the grid `t0 + k dt`.
#[derive(Debug, Clone)]
pub struct Rollout<R> {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<Vec<R>>,
}

impl<R: Real> Rollout<R> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.states.len())
            .map(|k| self.t0 + k as f64 * self.dt)
            .collect()
    }

    pub fn final_state(&self) -> &[R] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Plain-value copy of the states.
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let states = self
            .states
            .iter()
            .map(|r| r.iter().map(|v| v.value()).collect())
            .collect();
        Trajectory::new(self.timestamps(), states, None)
    }
}

fn forcing_at(forcing: Option<&ForcingSignal>, t: f64) -> Vec<f64> {
    forcing.map(|f| f.at(t)).unwrap_or_default()
}

/// Integrates `steps` RK4 steps of size `dt` from `x0` at `t0`, returning
/// `steps + 1` states. `theta` is soft-clamped first and the state is
/// projected onto the admissible set after every step.
#[allow(clippy::too_many_arguments)]
pub fn integrate<R: Real>(
    spec: &SystemSpec,
    x0: &[R],
    forcing: Option<&ForcingSignal>,
    theta: &[R],
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<Rollout<R>> {
    if x0.len() != spec.state_dim() {
        return Err(Error::Dimension {
            what: "initial state",
            expected: spec.state_dim(),
            got: x0.len(),
        });
    }
    if spec.forcing_dim > 0 && forcing.is_none() {
        return Err(Error::InvalidArgument(format!(
            "system '{}' needs {} forcing channels",
            spec.name, spec.forcing_dim
        )));
    }
    check(x0, 0, "initial state")?;
    let theta = soft_clamp(theta);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut u_t = forcing_at(forcing, t0);
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let u_half = forcing_at(forcing, t + dt / 2.0);
        let u_next = forcing_at(forcing, t + dt);
        let mut next = rk4_step(spec, &states[k], &u_t, &u_half, &u_next, t, dt, &theta, k)?;
        spec.project(&mut next);
        states.push(next);
        u_t = u_next;
    }
    Ok(Rollout { t0, dt, states })
}

/// Rollout matched to an observation of `t_obs` samples at `fps`:
/// `min(500, t_obs)` states (including `x0`) spaced `min(0.03, 1/fps)` apart.
pub fn rollout<R: Real>(
    spec: &SystemSpec,
    x0: &[R],
    forcing: Option<&ForcingSignal>,
    theta: &[R],
    t_obs: usize,
    fps: f64,
) -> Result<Rollout<R>> {
    rollout_from(spec, x0, forcing, theta, 0.0, t_obs, fps)
}

/// [`rollout`] starting at time `t0`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_from<R: Real>(
    spec: &SystemSpec,
    x0: &[R],
    forcing: Option<&ForcingSignal>,
    theta: &[R],
    t0: f64,
    t_obs: usize,
    fps: f64,
) -> Result<Rollout<R>> {
    let (t_sim, dt) = rollout_grid(t_obs, fps)?;
    if t_sim == 0 {
        return Err(Error::TooShort { need: 1, got: 0 });
    }
    integrate(spec, x0, forcing, theta, t0, dt, t_sim - 1)
}

/// Largest internal step used by [`simulate`].
pub const SIMULATE_MAX_DT: f64 = 1e-3;

/// Samples the system at `t_k = k / fps` for `max(1, round(duration * fps))`
/// rows, integrating with sub-steps no larger than [`SIMULATE_MAX_DT`].
/// Forcing, when present, is recorded alongside the states.
pub fn simulate(
    spec: &SystemSpec,
    x0: &[f64],
    forcing: Option<&ForcingSignal>,
    theta: &[f64],
    duration: f64,
    fps: f64,
) -> Result<Trajectory> {
    if !(fps > 0.0) || !(duration >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need fps > 0 and duration >= 0, got fps {fps}, duration {duration}"
        )));
    }
    let rows = ((duration * fps).round() as usize).max(1);
    let sample_dt = 1.0 / fps;
    let sub = (sample_dt / SIMULATE_MAX_DT).ceil().max(1.0) as usize;
    let dt = sample_dt / sub as f64;
    let mut ts = Vec::with_capacity(rows);
    let mut states = Vec::with_capacity(rows);
    let mut x = x0.to_vec();
    for k in 0..rows {
        let t = k as f64 * sample_dt;
        if k > 0 {
            let seg = integrate(
                spec,
                &x,
                forcing,
                theta,
                (k - 1) as f64 * sample_dt,
                dt,
                sub,
            )?;
            x = seg.final_state().to_vec();
        }
        ts.push(t);
        states.push(x.clone());
    }
    let u = forcing.map(|f| ts.iter().map(|&t| f.at(t)).collect());
    Ok(Trajectory::new(ts, states, u)?.with_fps(fps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::dynamics::registry_lookup;

    #[test]
    fn zero_rhs_is_identity() {
        let led = registry_lookup("led").unwrap();
        let x = rk4_step(&led, &[0.7], &[], &[], &[], 0.0, 0.1, &[0.0], 0).unwrap();
        assert_eq!(x, vec![0.7]);
    }

    #[test]
    fn hand_evaluated_growth_step() {
        // dx/dt = x via LED with negative rate (rk4_step does not clamp)
        let led = registry_lookup("led").unwrap();
        let x = rk4_step(&led, &[1.0], &[], &[], &[], 0.0, 0.1, &[-1.0], 0).unwrap();
        let (k1, k2, k3, k4) = (1.0, 1.05, 1.0525, 1.10525);
        let oracle = 1.0 + 0.1 / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        assert!((x[0] - oracle).abs() < 1e-15);
        assert!((x[0] - 1.105_170_833_333).abs() < 1e-12);
    }

    #[test]
    fn grid_examples() {
        assert_eq!(rollout_grid(800, 30.0).unwrap(), (500, 0.03));
        let (n, dt) = rollout_grid(100, 60.0).unwrap();
        assert_eq!(n, 100);
        assert_eq!(dt, 1.0 / 60.0);
        assert!(rollout_grid(10, 0.0).is_err());
    }

    #[test]
    fn rollout_length_and_timestamps() {
        let led = registry_lookup("led").unwrap();
        let r = rollout(&led, &[1.0], None, &[0.5], 800, 30.0).unwrap();
        assert_eq!(r.len(), 500);
        let ts = r.timestamps();
        assert!((ts[499] - 499.0 * 0.03).abs() < 1e-12);
    }

    #[test]
    fn non_finite_reports_step_and_stage() {
        let lorenz = registry_lookup("lorenz").unwrap();
        let err = integrate(
            &lorenz,
            &[1e200, 1e200, 1e200],
            None,
            &[10.0, 28.0, 2.0],
            0.0,
            0.1,
            5,
        )
        .unwrap_err();
        match err {
            Error::NonFinite {
                step,
                component,
                stage,
            } => {
                assert_eq!((step, component, stage), (0, 1, "k1"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn forcing_required() {
        let rotor = registry_lookup("rotor").unwrap();
        assert!(integrate(
            &rotor,
            &[0.0, 0.0],
            None,
            &rotor.theta_nominal,
            0.0,
            0.01,
            3
        )
        .is_err());
    }

    #[test]
    fn pendulum_small_angle_period() {
        let p = registry_lookup("pendulum").unwrap();
        let dt = 0.001;
        let r = integrate(&p, &[0.05, 0.0], None, &[1.0, 0.0], 0.0, dt, 10_000).unwrap();
        // downward zero crossings of the angle, linearly interpolated
        let mut crossings = Vec::new();
        for k in 1..r.len() {
            let (a, b) = (r.states[k - 1][0], r.states[k][0]);
            if a > 0.0 && b <= 0.0 {
                crossings.push((k - 1) as f64 * dt + dt * a / (a - b));
            }
        }
        let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let oracle = 2.0 * std::f64::consts::PI * (1.0f64 / 9.81).sqrt();
        assert!(
            (period - oracle).abs() / oracle < 0.01,
            "{period} vs {oracle}"
        );
        assert!((oracle - 2.006).abs() < 1e-3);
    }

    #[test]
    fn taped_rollout_matches_plain() {
        let p = registry_lookup("pendulum").unwrap();
        let plain = rollout(&p, &[0.3, 0.0], None, &[0.9, 0.05], 40, 30.0).unwrap();
        let tape = Tape::new();
        let theta = tape.vars(&[0.9, 0.05]);
        let x0 = tape.vars(&[0.3, 0.0]);
        let taped = rollout(&p, &x0, None, &theta, 40, 30.0).unwrap();
        for (a, b) in plain.states.iter().zip(&taped.states) {
            for (u, v) in a.iter().zip(b) {
                assert_eq!(*u, v.value());
            }
        }
    }
}
