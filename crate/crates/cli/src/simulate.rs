use std::path::{Path, PathBuf};

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use physid::dynamics::{registry_lookup, soft_clamp, ForcingSignal, Registry, SystemSpec};
use physid::integrator::{simulate, write_csv_with_names, Trajectory};
use physid::synth::{add_noise, default_forcing, default_setup, Scenario};

use crate::error::{CliError, Result};
use crate::table::{read_forcing, write_file};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub system: String,
    /// TOML file with extra system definitions.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Comma-separated parameters; defaults to the nominal values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Option<Vec<f64>>,
    /// Comma-separated initial state.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    /// Seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// `t,u1..uF` CSV; systems with inputs otherwise get a built-in actuation.
    #[arg(long)]
    pub forcing: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub sim: SimulateArgs,
    /// Standard deviation of the noise added to each measured channel.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

pub fn lookup(system: &str, registry: Option<&Path>) -> Result<SystemSpec> {
    Ok(match registry {
        Some(path) => Registry::from_toml_file(path)?.lookup(system)?,
        None => registry_lookup(system)?,
    })
}

struct Prepared {
    spec: SystemSpec,
    theta: Vec<f64>,
    x0: Vec<f64>,
    duration: f64,
    forcing: Option<ForcingSignal>,
}

fn prepare(a: &SimulateArgs) -> Result<Prepared> {
    let spec = lookup(&a.system, a.registry.as_deref())?;
    let theta = a
        .theta
        .clone()
        .unwrap_or_else(|| spec.theta_nominal.clone());
    if theta.len() != spec.param_count() {
        return Err(CliError::Usage(format!(
            "{} takes {} parameters ({}), got {}",
            spec.name,
            spec.param_count(),
            spec.param_names.join(", "),
            theta.len()
        )));
    }
    for (i, &v) in theta.iter().enumerate() {
        let (lo, hi) = (spec.lower_bounds[i], spec.upper_bounds[i]);
        if !(lo..=hi).contains(&v) {
            eprintln!(
                "warning: {} = {v} is outside [{lo}, {hi}]",
                spec.param_names[i]
            );
        }
    }
    let theta = soft_clamp(&theta);
    let (default_x0, default_duration) = default_setup(&spec);
    let x0 = a.x0.clone().unwrap_or(default_x0);
    if x0.len() != spec.state_dim() {
        return Err(CliError::Usage(format!(
            "{} has {} states ({}), got {}",
            spec.name,
            spec.state_dim(),
            spec.state_names.join(", "),
            x0.len()
        )));
    }
    let duration = a.duration.unwrap_or(default_duration);
    let forcing = match &a.forcing {
        Some(path) => Some(read_forcing(path)?),
        None => default_forcing(&spec, duration),
    };
    Ok(Prepared {
        spec,
        theta,
        x0,
        duration,
        forcing,
    })
}

fn write_traj(path: &Path, spec: &SystemSpec, traj: &Trajectory) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(write_csv_with_names(path, traj, Some(&spec.state_names))?)
}

pub fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let p = prepare(a)?;
    let traj = simulate(
        &p.spec,
        &p.x0,
        p.forcing.as_ref(),
        &p.theta,
        p.duration,
        a.fps,
    )?;
    write_traj(&a.out, &p.spec, &traj)?;
    println!("wrote {} rows to {}", traj.len(), a.out.display());
    Ok(())
}

/// Sidecar path `<out stem>.truth.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

pub fn run_synth(a: &SynthArgs) -> Result<()> {
    if !(a.noise_sigma >= 0.0) || !a.noise_sigma.is_finite() {
        return Err(CliError::Usage(format!(
            "--noise-sigma must be a non-negative number, got {}",
            a.noise_sigma
        )));
    }
    let p = prepare(&a.sim)?;
    let clean = simulate(
        &p.spec,
        &p.x0,
        p.forcing.as_ref(),
        &p.theta,
        p.duration,
        a.sim.fps,
    )?;
    let sigma: Vec<f64> = p
        .spec
        .measurement_mask
        .iter()
        .map(|&m| if m { a.noise_sigma } else { 0.0 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let noisy = add_noise(&clean, &p.spec.measurement_mask, &sigma, &mut rng)?;
    write_traj(&a.sim.out, &p.spec, &noisy)?;
    let scenario = Scenario {
        system: p.spec.name.clone(),
        theta_true: p.theta,
        x0: p.x0,
        duration: p.duration,
        fps: a.sim.fps,
        noise_sigma: sigma,
        seed: a.seed,
    };
    let sidecar = sidecar_path(&a.sim.out);
    let json = serde_json::to_string_pretty(&scenario).expect("scenario serializes");
    write_file(&sidecar, json + "\n")?;
    println!(
        "wrote {} rows to {} (truth in {})",
        noisy.len(),
        a.sim.out.display(),
        sidecar.display()
    );
    Ok(())
}
