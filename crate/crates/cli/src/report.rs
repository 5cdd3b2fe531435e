use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;

use physid::trainer::{summarize_seeds, EstimateReport};

use crate::error::{CliError, Result};
use crate::fit::RunReport;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A `report.json`, a run directory, or a directory of seed runs.
    pub path: PathBuf,
    /// Comma-separated true parameters to score against.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub truth: Option<Vec<f64>>,
}

fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path, e.to_string()))
}

/// Every `report.json` at or directly below `path`, sorted by path.
pub fn find_reports(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let own = path.join("report.json");
    if own.is_file() {
        return Ok(vec![own]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| CliError::io(path, e))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("report.json"))
        .filter(|p| p.is_file())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(CliError::data(path, "no report.json found"));
    }
    Ok(found)
}

pub fn render(est: &EstimateReport) -> String {
    let mut s = format!(
        "## {} (seed {})\n\nbest epoch {} of {}, trajectory loss {:.4e}, {:.1} s\n\n",
        est.system, est.seed, est.best_epoch, est.epochs_run, est.best_loss.traj, est.wall_clock_s
    );
    match &est.errors {
        Some(errs) => {
            s.push_str("| Parameter | Estimate | Truth | Error (%) |\n|---|---|---|---|\n");
            for (e, u) in errs.iter().zip(&est.units) {
                writeln!(
                    s,
                    "| {} | {:.6} {u} | {} | {:.2} |",
                    e.name,
                    e.estimate,
                    e.truth,
                    100.0 * e.rel_error
                )
                .unwrap();
            }
        }
        None => {
            s.push_str("| Parameter | Estimate |\n|---|---|\n");
            for ((n, v), u) in est
                .theta_hat
                .names
                .iter()
                .zip(&est.theta_hat.values)
                .zip(&est.units)
            {
                writeln!(s, "| {n} | {v:.6} {u} |").unwrap();
            }
        }
    }
    s
}

pub fn run(a: &ReportArgs) -> Result<()> {
    let mut reports = Vec::new();
    for p in find_reports(&a.path)? {
        let mut est = read_report(&p)?.estimate;
        if let Some(t) = &a.truth {
            est = est.with_ground_truth(t)?;
        }
        reports.push(est);
    }
    for est in &reports {
        println!("{}", render(est));
    }
    if reports.len() > 1 {
        print!("{}", summarize_seeds(&reports)?.markdown());
    }
    Ok(())
}
