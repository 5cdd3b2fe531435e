use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use physid::dynamics::registry_lookup;
use physid::experiments::{
    recovery_truth, run_offset_ablation, run_recovery, run_rover_audio, Recovery, RoverAudio,
};
use physid::trainer::TrainConfig;

use crate::error::{CliError, Result};
use crate::fit::parse_seeds;
use crate::table::write_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Pendulum, draining tank, sliding block, LED and free fall.
    BenchmarksSynthetic,
    /// Pendulum with a camera offset, readout calibration cells on and off.
    AblationCellsOff,
    /// Rover with audio forcing at 20, 10 and 5 dB SNR.
    NoiseSweep,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::BenchmarksSynthetic => "benchmarks-synthetic",
            Suite::AblationCellsOff => "ablation-cells-off",
            Suite::NoiseSweep => "noise-sweep",
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// `42..46` (inclusive) or `42,43`.
    #[arg(long, default_value = "42")]
    pub seeds: String,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    /// Observation noise as a fraction of each channel's range.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value = "benchmarks")]
    pub out: PathBuf,
}

/// One condition measured over every seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    /// `values[seed][column]`
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Benchmark {
    pub suite: String,
    pub seeds: Vec<u64>,
    pub columns: Vec<String>,
    pub truth: Vec<f64>,
    pub conditions: Vec<Condition>,
    /// Spread of the condition means relative to their mean, in percent.
    pub variation_pct: Option<Vec<f64>>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    (
        m,
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt(),
    )
}

impl Condition {
    fn column(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }
}

impl Benchmark {
    fn means(&self, cond: &Condition) -> Vec<f64> {
        (0..self.columns.len())
            .map(|c| mean_std(&cond.column(c)).0)
            .collect()
    }

    fn with_variation(mut self) -> Self {
        let means: Vec<Vec<f64>> = self.conditions.iter().map(|c| self.means(c)).collect();
        self.variation_pct = Some(
            (0..self.columns.len())
                .map(|c| {
                    let col: Vec<f64> = means.iter().map(|m| m[c]).collect();
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    100.0 * (hi - lo) / mean_std(&col).0.abs()
                })
                .collect(),
        );
        self
    }

    pub fn markdown(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut s = format!("### {} (seeds {})\n\n| |", self.suite, seeds.join(", "));
        for c in &self.columns {
            write!(s, " {c} |").unwrap();
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(self.columns.len()));
        s.push_str("\n| Truth |");
        for t in &self.truth {
            write!(s, " {t} |").unwrap();
        }
        s.push('\n');
        for cond in &self.conditions {
            write!(s, "| {} (Mean ± Std) |", cond.label).unwrap();
            for c in 0..self.columns.len() {
                let (m, sd) = mean_std(&cond.column(c));
                write!(s, " {m:.4} ± {sd:.4} |").unwrap();
            }
            write!(s, "\n| {} Error (%) |", cond.label).unwrap();
            for (c, t) in self.truth.iter().enumerate() {
                let errs: Vec<f64> = cond
                    .column(c)
                    .iter()
                    .map(|v| 100.0 * (v - t).abs() / t.abs())
                    .collect();
                let (m, sd) = mean_std(&errs);
                write!(s, " {m:.2} ± {sd:.2} |").unwrap();
            }
            s.push('\n');
        }
        if let Some(v) = &self.variation_pct {
            s.push_str("| Variation (%) |");
            for x in v {
                write!(s, " {x:.3} |").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

const SYNTHETIC: [(&str, f64); 5] = [
    ("pendulum", 0.90),
    ("torricelli", 0.0128),
    ("sliding_block", 2.300),
    ("led", 0.92),
    ("free_fall", 9.8),
];

const SNR_LEVELS: [f64; 3] = [20.0, 10.0, 5.0];

pub fn evaluate(suite: Suite, seeds: &[u64], epochs: usize, noise: f64) -> Result<Benchmark> {
    let train_for = |seed: u64| TrainConfig {
        seed,
        max_epochs: epochs,
        ..TrainConfig::default()
    };
    let bench = |columns: Vec<String>, truth: Vec<f64>, conditions: Vec<Condition>| Benchmark {
        suite: suite.name().into(),
        seeds: seeds.to_vec(),
        columns,
        truth,
        conditions,
        variation_pct: None,
    };
    Ok(match suite {
        Suite::BenchmarksSynthetic => {
            let mut values = vec![Vec::new(); seeds.len()];
            let mut columns = Vec::new();
            for (system, value) in SYNTHETIC {
                for (k, &seed) in seeds.iter().enumerate() {
                    let r = run_recovery(&Recovery {
                        system: system.into(),
                        truth: recovery_truth(system, value)?,
                        noise_fraction: noise,
                        duration: None,
                        data_seed: seed,
                        train: train_for(seed),
                    })?;
                    if k == 0 {
                        columns.push(r.quantity.clone());
                    }
                    values[k].push(r.estimate);
                }
            }
            let truth = SYNTHETIC.iter().map(|s| s.1).collect();
            let cond = Condition {
                label: "Estimate".into(),
                values,
            };
            bench(columns, truth, vec![cond])
        }
        Suite::AblationCellsOff => {
            let conditions = [("cells on", true), ("cells off", false)]
                .into_iter()
                .map(|(label, on)| {
                    let values = seeds
                        .iter()
                        .map(|&seed| {
                            Ok(vec![
                                run_offset_ablation(0.9, 0.05, on, seed, &train_for(seed))?
                                    .estimate,
                            ])
                        })
                        .collect::<Result<_>>()?;
                    Ok(Condition {
                        label: label.into(),
                        values,
                    })
                })
                .collect::<Result<_>>()?;
            bench(vec!["L".into()], vec![0.9], conditions)
        }
        Suite::NoiseSweep => {
            let rover = registry_lookup("rover")?;
            let truth: Vec<f64> = ["r", "m"]
                .iter()
                .map(|n| rover.theta_nominal[rover.param_index(n).expect("rover parameter")])
                .collect();
            let conditions = SNR_LEVELS
                .iter()
                .map(|&snr| {
                    let values = seeds
                        .iter()
                        .map(|&seed| {
                            let r = run_rover_audio(&RoverAudio {
                                snr_db: Some(snr),
                                train: train_for(seed),
                                ..RoverAudio::default()
                            })?;
                            let p = &r.report.theta_hat;
                            Ok(vec![
                                p.get("r").unwrap_or(f64::NAN),
                                p.get("m").unwrap_or(f64::NAN),
                            ])
                        })
                        .collect::<Result<_>>()?;
                    Ok(Condition {
                        label: format!("{snr} dB"),
                        values,
                    })
                })
                .collect::<Result<_>>()?;
            bench(vec!["r".into(), "m".into()], truth, conditions).with_variation()
        }
    })
}

pub fn run(a: &BenchmarkArgs) -> Result<()> {
    let seeds = parse_seeds(&a.seeds)?;
    if a.epochs == 0 {
        return Err(CliError::Usage("--epochs must be positive".into()));
    }
    let b = evaluate(a.suite, &seeds, a.epochs, a.noise)?;
    let md = b.markdown();
    write_file(&a.out.join(format!("{}.md", b.suite)), &md)?;
    let json = serde_json::to_string_pretty(&b).expect("benchmark serializes");
    write_file(&a.out.join(format!("{}.json", b.suite)), json + "\n")?;
    print!("{md}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_layout() {
        let b = Benchmark {
            suite: "demo".into(),
            seeds: vec![1, 2],
            columns: vec!["L".into()],
            truth: vec![1.0],
            conditions: vec![Condition {
                label: "Estimate".into(),
                values: vec![vec![1.1], vec![0.9]],
            }],
            variation_pct: None,
        }
        .with_variation();
        let md = b.markdown();
        assert!(
            md.contains("| Estimate (Mean ± Std) | 1.0000 ± 0.1414 |"),
            "{md}"
        );
        assert!(md.contains("| Estimate Error (%) | 10.00 ± 0.00 |"), "{md}");
        assert!(md.contains("| Variation (%) | 0.000 |"), "{md}");
    }
}
