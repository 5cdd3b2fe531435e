//! Synthetic observations from the simulator, for tests and benchmarks.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, ForcingSignal, SystemSpec};
use crate::integrator::{simulate, Trajectory};
use crate::{Error, Result};

/// Everything needed to regenerate a synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: String,
    pub theta_true: Vec<f64>,
    pub x0: Vec<f64>,
    pub duration: f64,
    pub fps: f64,
    /// Per-channel noise standard deviation on measured channels.
    pub noise_sigma: Vec<f64>,
    pub seed: u64,
}

/// Typical initial state and recording length for each built-in model.
pub fn default_setup(spec: &SystemSpec) -> (Vec<f64>, f64) {
    match spec.dynamics {
        Dynamics::Pendulum => (vec![0.3, 0.0], 10.0),
        Dynamics::Torricelli => (vec![0.04], 10.0),
        Dynamics::Led => (vec![1.0], 5.0),
        Dynamics::SlidingBlock => (vec![0.0], 3.0),
        Dynamics::FreeFall => (vec![0.0], 3.0),
        Dynamics::Rover => (vec![0.0, 0.0, 0.0, 0.0], 12.0),
        Dynamics::Rotor => (vec![0.0, 0.0], 2.0),
        Dynamics::LotkaVolterra => (vec![10.0, 5.0], 15.0),
        Dynamics::Lorenz => (vec![1.0, 1.0, 1.0], 3.0),
    }
}

/// Smooth, persistently exciting actuation over `[0, duration]` for models
/// that need forcing.
pub fn default_forcing(spec: &SystemSpec, duration: f64) -> Option<ForcingSignal> {
    let n = (duration * 100.0).ceil() as usize + 1;
    let ts: Vec<f64> = (0..n).map(|k| k as f64 * 0.01).collect();
    let values: Vec<Vec<f64>> = match spec.dynamics {
        Dynamics::Rover => ts.iter().map(|&t| rover_forcing(t)).collect(),
        Dynamics::Rotor => ts
            .iter()
            .map(|&t| vec![1.0 + 0.5 * (2.0 * t).sin()])
            .collect(),
        _ => return None,
    };
    Some(ForcingSignal::new(ts, values).expect("monotone grid"))
}

/// Wheel speeds (rad/s) and motor power (W) of a rover doing gentle
/// S-turns while speeding up and slowing down.
pub fn rover_forcing(t: f64) -> Vec<f64> {
    let mean = 8.0 + 2.0 * (0.4 * t).sin();
    let diff = 1.5 * (0.7 * t).sin();
    let power = 40.0 + 25.0 * (0.5 * t).sin() + 10.0 * (1.3 * t).cos();
    vec![mean + diff, mean - diff, power]
}

/// Adds i.i.d. Gaussian noise with the given per-channel deviation to the
/// measured channels.
pub fn add_noise<G: Rng>(
    traj: &Trajectory,
    mask: &[bool],
    sigma: &[f64],
    rng: &mut G,
) -> Result<Trajectory> {
    if sigma.len() != traj.state_dim() || mask.len() != traj.state_dim() {
        return Err(Error::Dimension {
            what: "noise channels",
            expected: traj.state_dim(),
            got: sigma.len().min(mask.len()),
        });
    }
    if sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidArgument(
            "noise sigma must be non-negative".into(),
        ));
    }
    let dists: Vec<Option<Normal<f64>>> = sigma
        .iter()
        .zip(mask)
        .map(|(&s, &m)| (m && s > 0.0).then(|| Normal::new(0.0, s).expect("positive sigma")))
        .collect();
    let states = traj
        .states()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&dists)
                .map(|(v, d)| match d {
                    Some(d) => v + d.sample(rng),
                    None => *v,
                })
                .collect()
        })
        .collect();
    let mut out = Trajectory::new(
        traj.timestamps().to_vec(),
        states,
        traj.forcing().map(|f| f.to_vec()),
    )?;
    if let Some(fps) = traj.fps() {
        out = out.with_fps(fps);
    }
    Ok(out)
}

/// Noise deviation per channel as a fraction of that channel's range.
pub fn relative_sigma(traj: &Trajectory, fraction: f64) -> Vec<f64> {
    (0..traj.state_dim())
        .map(|i| {
            let ch = traj.channel(i);
            let lo = ch.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            fraction * (hi - lo)
        })
        .collect()
}

/// Simulates the truth and adds noise of `noise_fraction` times each
/// measured channel's range.
#[allow(clippy::too_many_arguments)]
pub fn synthesize<G: Rng>(
    spec: &SystemSpec,
    theta_true: &[f64],
    x0: &[f64],
    forcing: Option<&ForcingSignal>,
    duration: f64,
    fps: f64,
    noise_fraction: f64,
    rng: &mut G,
) -> Result<Trajectory> {
    let clean = simulate(spec, x0, forcing, theta_true, duration, fps)?;
    if noise_fraction == 0.0 {
        return Ok(clean);
    }
    let sigma = relative_sigma(&clean, noise_fraction);
    add_noise(&clean, &spec.measurement_mask, &sigma, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::registry_lookup;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noise_only_on_measured_channels() {
        let spec = registry_lookup("pendulum").unwrap();
        let clean = simulate(&spec, &[0.3, 0.0], None, &[0.9, 0.05], 20.0, 30.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noisy = add_noise(&clean, &spec.measurement_mask, &[0.01, 0.01], &mut rng).unwrap();
        let d: Vec<f64> = clean
            .channel(0)
            .iter()
            .zip(noisy.channel(0))
            .map(|(a, b)| b - a)
            .collect();
        let sd = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
        assert!((sd - 0.01).abs() < 0.001, "{sd}");
        assert_eq!(clean.channel(1), noisy.channel(1));
    }

    #[test]
    fn forcing_covers_duration() {
        let spec = registry_lookup("rover").unwrap();
        let f = default_forcing(&spec, 12.0).unwrap();
        assert!(*f.timestamps().last().unwrap() >= 12.0);
        assert_eq!(f.dim(), 3);
        assert!(default_forcing(&registry_lookup("led").unwrap(), 1.0).is_none());
    }
}
