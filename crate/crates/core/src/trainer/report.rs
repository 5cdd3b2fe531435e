use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::dynamics::ParamVector;
use crate::objective::LossBreakdown;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean total loss over the epoch's batches (with dropout).
    pub train_loss: f64,
    /// Loss at the mean readout over all windows, without dropout.
    pub eval: LossBreakdown,
    /// Best evaluation trajectory loss so far.
    pub best_traj: f64,
    /// Parameters at this epoch's evaluation.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamError {
    pub name: String,
    pub truth: f64,
    pub estimate: f64,
    /// `|estimate - truth| / |truth|`
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub system: String,
    pub theta_hat: ParamVector,
    pub units: Vec<String>,
    pub theta_bar: Vec<f64>,
    /// Raw calibration head outputs.
    pub calib_raw: Vec<f64>,
    /// Per-channel trajectory offsets.
    pub gamma: Vec<f64>,
    /// Initial state used by the best rollout.
    pub x0: Vec<f64>,
    pub best_loss: LossBreakdown,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub skipped_steps: usize,
    pub seed: u64,
    pub config: TrainConfig,
    pub overrides: Vec<String>,
    pub loss_curve: Vec<EpochRecord>,
    /// Filled in after training when ground truth is known.
    pub errors: Option<Vec<ParamError>>,
    pub wall_clock_s: f64,
}

impl EstimateReport {
    /// Attaches per-parameter errors against known values.
    pub fn with_ground_truth(mut self, truth: &[f64]) -> Result<Self> {
        if truth.len() != self.theta_hat.values.len() {
            return Err(Error::Dimension {
                what: "ground-truth parameters",
                expected: self.theta_hat.values.len(),
                got: truth.len(),
            });
        }
        self.errors = Some(
            self.theta_hat
                .names
                .iter()
                .zip(&self.theta_hat.values)
                .zip(truth)
                .map(|((n, &e), &t)| ParamError {
                    name: n.clone(),
                    truth: t,
                    estimate: e,
                    rel_error: (e - t).abs() / t.abs(),
                })
                .collect(),
        );
        Ok(self)
    }

    pub fn rel_error(&self, name: &str) -> Option<f64> {
        self.errors
            .as_ref()?
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.rel_error)
    }

    /// `epoch,lr,train_loss,traj,param_penalty,total,best_traj,theta...`
    pub fn curves_csv(&self) -> String {
        let mut s = String::from("epoch,lr,train_loss,traj,param_penalty,total,best_traj");
        for n in &self.theta_hat.names {
            write!(s, ",{n}").unwrap();
        }
        s.push('\n');
        for r in &self.loss_curve {
            write!(
                s,
                "{},{},{},{},{},{},{}",
                r.epoch,
                r.lr,
                r.train_loss,
                r.eval.traj,
                r.eval.param_penalty,
                r.eval.total,
                r.best_traj
            )
            .unwrap();
            for i in 0..self.theta_hat.names.len() {
                match r.theta.get(i) {
                    Some(v) => write!(s, ",{v}").unwrap(),
                    None => s.push_str(",nan"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Mean and spread of each parameter across seeded runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub system: String,
    pub seeds: Vec<u64>,
    pub names: Vec<String>,
    /// `values[seed][param]`
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (n - 1).
    pub std: Vec<f64>,
    pub rel_std: Vec<f64>,
    /// Mean and std of the relative error in percent, when truth is known.
    pub error_pct: Option<Vec<(f64, f64)>>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

pub fn summarize_seeds(reports: &[EstimateReport]) -> Result<SeedSummary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no reports to summarize".into()))?;
    let names = first.theta_hat.names.clone();
    let k = names.len();
    let values: Vec<Vec<f64>> = reports.iter().map(|r| r.theta_hat.values.clone()).collect();
    if values.iter().any(|v| v.len() != k) {
        return Err(Error::InvalidArgument(
            "reports disagree on parameters".into(),
        ));
    }
    let mut mean = Vec::with_capacity(k);
    let mut std = Vec::with_capacity(k);
    for i in 0..k {
        let col: Vec<f64> = values.iter().map(|v| v[i]).collect();
        let (m, s) = mean_std(&col);
        mean.push(m);
        std.push(s);
    }
    let rel_std = mean.iter().zip(&std).map(|(m, s)| s / m.abs()).collect();
    let error_pct = if reports.iter().all(|r| r.errors.is_some()) {
        Some(
            (0..k)
                .map(|i| {
                    let col: Vec<f64> = reports
                        .iter()
                        .map(|r| 100.0 * r.errors.as_ref().unwrap()[i].rel_error)
                        .collect();
                    mean_std(&col)
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(SeedSummary {
        system: first.system.clone(),
        seeds: reports.iter().map(|r| r.seed).collect(),
        names,
        values,
        mean,
        std,
        rel_std,
        error_pct,
    })
}

impl SeedSummary {
    /// Markdown table: one row per parameter with mean ± std and error.
    pub fn markdown(&self) -> String {
        let mut s = format!(
            "### {} (seeds {})\n\n| Parameter | Mean ± Std | Error (%) |\n|---|---|---|\n",
            self.system,
            self.seeds
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
        for i in 0..self.names.len() {
            let err = match &self.error_pct {
                Some(e) => format!("{:.2} ± {:.2}", e[i].0, e[i].1),
                None => "n/a".into(),
            };
            writeln!(
                s,
                "| {} | {:.4} ± {:.4} | {} |",
                self.names[i], self.mean[i], self.std[i], err
            )
            .unwrap();
        }
        s
    }
}
