use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use physid::ltcnet::{save_checkpoint, Checkpoint};
use physid::trainer::{summarize_seeds, train, EstimateReport};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::table::write_file;

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// `42..46` (inclusive) or `42,43,44`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `train.max_epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
}

/// What `report.json` holds: the estimate and the config that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub estimate: EstimateReport,
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Usage(format!("invalid seed list '{s}'"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn apply_overrides(cfg: &mut RunConfig, a: &FitArgs) -> Result<()> {
    if let Some(s) = &a.system {
        cfg.system = s.clone();
    }
    if let Some(s) = a.seed {
        cfg.seeds = vec![s];
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(o) = &a.out {
        cfg.out = std::path::absolute(o).map_err(|e| CliError::io(o, e))?;
    }
    if let Some(e) = a.epochs {
        cfg.train.max_epochs = e;
    }
    if cfg.seeds.is_empty() {
        return Err(CliError::Usage("no seeds to run".into()));
    }
    cfg.train.validate()?;
    Ok(())
}

fn run_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    if cfg.seeds.len() == 1 {
        cfg.out.clone()
    } else {
        cfg.out.join(format!("seed-{seed}"))
    }
}

fn describe(est: &EstimateReport) -> String {
    let params: Vec<String> = est
        .theta_hat
        .names
        .iter()
        .zip(&est.theta_hat.values)
        .zip(&est.units)
        .map(|((n, v), u)| format!("{n} = {v:.6} {u}"))
        .collect();
    format!(
        "seed {}: {} (best epoch {}, {:.1} s)",
        est.seed,
        params.join(", "),
        est.best_epoch,
        est.wall_clock_s
    )
}

fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    seed: u64,
    out: &physid::trainer::TrainOutcome,
    est: &EstimateReport,
) -> Result<()> {
    let resolved = RunConfig {
        seeds: vec![seed],
        out: dir.to_path_buf(),
        train: est.config.clone(),
        ..cfg.clone()
    };
    let report = RunReport {
        config: resolved.clone(),
        estimate: est.clone(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&dir.join("report.json"), json + "\n")?;
    write_file(&dir.join("curves.csv"), est.curves_csv())?;
    write_file(&dir.join("config.resolved"), resolved.to_toml())?;
    let extra = BTreeMap::from([
        ("zscore_mean".to_string(), out.zscore.mean.clone()),
        ("zscore_std".to_string(), out.zscore.std.clone()),
    ]);
    let ck = Checkpoint {
        model: out.model.clone(),
        seed,
        epoch: est.best_epoch,
        system: Some(est.system.clone()),
        extra,
    };
    save_checkpoint(&dir.join("checkpoint.bin"), &ck)?;
    Ok(())
}

pub fn run(a: &FitArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    apply_overrides(&mut cfg, a)?;
    let spec = cfg.spec()?;
    let data = cfg.load_data(&spec)?;
    let mut reports = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mut tc = cfg.train.clone();
        tc.seed = seed;
        let out = train(&spec, &data, &tc)?;
        let est = match &cfg.truth {
            Some(t) => out.report.clone().with_ground_truth(t)?,
            None => out.report.clone(),
        };
        let dir = run_dir(&cfg, seed);
        write_run(&dir, &cfg, seed, &out, &est)?;
        println!("{}", describe(&est));
        reports.push(est);
    }
    if reports.len() > 1 {
        let summary = summarize_seeds(&reports)?;
        let md = summary.markdown();
        write_file(&cfg.out.join("summary.md"), &md)?;
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_file(&cfg.out.join("summary.json"), json + "\n")?;
        print!("\n{md}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("42..46").unwrap(), vec![42, 43, 44, 45, 46]);
        assert_eq!(parse_seeds("1, 5,7").unwrap(), vec![1, 5, 7]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("5..3").is_err());
        assert!(parse_seeds("a").is_err());
    }
}
