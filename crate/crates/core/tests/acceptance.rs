//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails. Pass criterion numbers as arguments
//! to run a subset.

use std::time::Instant;

use physid::dynamics::registry_lookup;
use physid::experiments::{
    recovery_truth, run_lotka_volterra_chart, run_recovery, run_rover_audio, run_sine_chart,
    ChartResult, Recovery, RoverAudio,
};
use physid::ingest::{synth_tones, wav_features, FFT_SIZE, TARGET_RATE};
use physid::integrator::integrate;
use physid::ltcnet::denormalize;
use physid::objective::{param_penalty, total_loss, traj_loss, PenaltyWeights};
use physid::trainer::check::{check_full_chain, check_primitives, CHAIN_TOL, PRIMITIVE_TOL};
use physid::trainer::{summarize_seeds, TrainConfig};

const EPOCHS: usize = 60;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn train_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        max_epochs: EPOCHS,
        seed,
        ..TrainConfig::default()
    }
}

fn led_oracle() -> Outcome {
    let t = Instant::now();
    let spec = registry_lookup("led").unwrap();
    let r = integrate(&spec, &[1.0], None, &[1.0], 0.0, 0.01, 100).unwrap();
    let err = (r.final_state()[0] - (-1.0f64).exp()).abs();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        err < 1e-8 && secs < 1.0,
        format!("|I(1) - 1/e| = {err:.2e} (< 1e-8), {secs:.3} s"),
    )
}

fn pendulum_final(dt: f64) -> Vec<f64> {
    let spec = registry_lookup("pendulum").unwrap();
    let steps = (2.0 / dt).round() as usize;
    integrate(&spec, &[1.0, 0.0], None, &[0.9, 0.3], 0.0, dt, steps)
        .unwrap()
        .final_state()
        .to_vec()
}

fn rk4_order() -> Outcome {
    let t = Instant::now();
    let reference = pendulum_final(0.02 / 64.0);
    let err = |dt: f64| {
        pendulum_final(dt)
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let e: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| err(dt)).collect();
    let rates = [(e[0] / e[1]).log2(), (e[1] / e[2]).log2()];
    let secs = t.elapsed().as_secs_f64();
    let pass = rates.iter().all(|r| (3.7..=4.3).contains(r)) && secs < 5.0;
    outcome(
        pass,
        format!(
            "rates {:.3}, {:.3} (in [3.7, 4.3]), {secs:.3} s",
            rates[0], rates[1]
        ),
    )
}

fn torricelli_oracle() -> Outcome {
    let spec = registry_lookup("torricelli").unwrap();
    let (h0, k, dt) = (0.04, 0.0128, 0.005);
    let r = integrate(&spec, &[h0], None, &[k], 0.0, dt, 8000).unwrap();
    let worst = r
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let exact = (h0.sqrt() - k * i as f64 * dt / 2.0).max(0.0).powi(2);
            (s[0] - exact).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-6,
        format!("max |h - h_exact| = {worst:.2e} over 40 s (< 1e-6)"),
    )
}

fn gradient_fidelity() -> Outcome {
    let t = Instant::now();
    let prims = check_primitives(1000, 42);
    let prim_worst = prims.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let chain = check_full_chain(42).unwrap();
    let chain_worst = chain.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let coords: usize = chain.iter().map(|c| c.coords).sum();
    let secs = t.elapsed().as_secs_f64();
    let pass = prim_worst < PRIMITIVE_TOL && chain_worst < CHAIN_TOL && secs < 60.0;
    outcome(
        pass,
        format!(
            "primitives {prim_worst:.2e} (< 1e-6, {} kinds); full chain {chain_worst:.2e} over {coords} weights (< 1e-4); {secs:.1} s",
            prims.len()
        ),
    )
}

fn denormalization() -> Outcome {
    let nominal = 0.9;
    let n = 100_001;
    let vals: Vec<f64> = (0..n)
        .map(|i| denormalize(&[i as f64 / (n - 1) as f64], &[nominal]).unwrap()[0])
        .collect();
    let in_range = vals
        .iter()
        .all(|&v| v >= 0.525 * nominal - 1e-15 && v <= 1.475 * nominal + 1e-15);
    let decreasing = vals.windows(2).all(|w| w[1] < w[0]);
    let midpoint = denormalize(&[0.5], &[nominal]).unwrap()[0] == nominal;
    outcome(
        in_range && decreasing && midpoint,
        format!("{n} points: in range {in_range}, strictly decreasing {decreasing}, midpoint exact {midpoint}"),
    )
}

fn loss_properties() -> Outcome {
    let sim: Vec<Vec<f64>> = (0..50)
        .map(|k| vec![(k as f64 * 0.1).sin(), (k as f64 * 0.1).cos()])
        .collect();
    let meas: Vec<Vec<f64>> = sim
        .iter()
        .map(|r| vec![r[0] + 0.37, r[1] * 5.0 - 2.0])
        .collect();
    let mask = [true, false];
    let base = traj_loss(&meas, &sim, &mask, &[0.0, 0.0]).unwrap();
    let garbled: Vec<Vec<f64>> = meas.iter().map(|r| vec![r[0], 1e6]).collect();
    let masked = traj_loss(&garbled, &sim, &mask, &[0.0, 0.0]).unwrap() == base;
    let absorbed = traj_loss(&meas, &sim, &mask, &[0.37, 0.0]).unwrap();

    let (lo, hi) = ([0.1, 0.2], [2.0, 1.0]);
    let w = PenaltyWeights::uniform(2, 10.0);
    let pen = |t: [f64; 2]| param_penalty(&t, &lo, &hi, &w).unwrap();
    let mut zero_inside = true;
    let mut positive_outside = true;
    let mut convex = true;
    for i in 0..=60 {
        for j in 0..=60 {
            let t = [-1.0 + i as f64 * 0.05, -1.0 + j as f64 * 0.05];
            let inside = (lo[0]..=hi[0]).contains(&t[0]) && (lo[1]..=hi[1]).contains(&t[1]);
            let p = pen(t);
            zero_inside &= !inside || p == 0.0;
            positive_outside &= inside || p > 0.0;
            let u = [1.7 - t[1], t[0] * 0.5];
            let mid = pen([(t[0] + u[0]) / 2.0, (t[1] + u[1]) / 2.0]);
            convex &= mid <= (p + pen(u)) / 2.0 + 1e-12;
        }
    }
    let (traj, penalty, lambda) = (0.123_456_789, 0.987_654_321, 1.7);
    let exact = total_loss(traj, penalty, lambda).unwrap().total.to_bits()
        == (traj + lambda * penalty).to_bits();
    let pass = masked && absorbed < 1e-28 && zero_inside && positive_outside && convex && exact;
    outcome(
        pass,
        format!(
            "masked invariance {masked}; offset-absorbed loss {absorbed:.1e}; penalty zero on box {zero_inside}, positive outside {positive_outside}, convex {convex}; total exact {exact}"
        ),
    )
}

#[allow(clippy::approx_constant)]
fn recovery_grid() -> Outcome {
    let cases: [(&str, &[f64]); 5] = [
        ("pendulum", &[0.45, 0.90, 1.50]),
        ("torricelli", &[0.0095, 0.0128, 0.0162]),
        ("led", &[2.3, 0.92, 0.46]),
        ("sliding_block", &[1.441, 2.300, 3.141]),
        ("free_fall", &[9.8]),
    ];
    let mut pass = true;
    let mut worst = [0.0f64; 2];
    let mut slowest = 0.0f64;
    for (system, values) in cases {
        let started = Instant::now();
        for &value in values {
            let mut errs = [0.0; 2];
            for (slot, noise) in [0.0, 0.01].into_iter().enumerate() {
                let r = run_recovery(&Recovery {
                    system: system.into(),
                    truth: recovery_truth(system, value).unwrap(),
                    noise_fraction: noise,
                    duration: None,
                    data_seed: 7,
                    train: train_cfg(42),
                })
                .unwrap();
                errs[slot] = r.rel_error;
                worst[slot] = worst[slot].max(r.rel_error);
            }
            let ok = errs[0] < 0.05 && errs[1] < 0.10;
            pass &= ok;
            println!(
                "    {system:<14} {value:>8}: noiseless {:.2}%, 1% noise {:.2}%{}",
                errs[0] * 100.0,
                errs[1] * 100.0,
                if ok { "" } else { "  <- out of tolerance" }
            );
        }
        let per_system = started.elapsed().as_secs_f64() / (2 * values.len()) as f64;
        slowest = slowest.max(per_system);
    }
    pass &= slowest < 300.0;
    outcome(
        pass,
        format!(
            "worst noiseless {:.2}% (< 5%), worst 1% noise {:.2}% (< 10%), slowest fit {slowest:.0} s",
            worst[0] * 100.0,
            worst[1] * 100.0
        ),
    )
}

fn rover_forced() -> Outcome {
    let with = run_rover_audio(&RoverAudio {
        train: train_cfg(42),
        ..RoverAudio::default()
    })
    .unwrap();
    let without = run_rover_audio(&RoverAudio {
        use_audio: false,
        train: train_cfg(42),
        ..RoverAudio::default()
    })
    .unwrap();
    let gap = (without.r_error - with.r_error) * 100.0;
    let pass = with.r_error < 0.15 && with.m_error < 0.15 && gap > 5.0;
    outcome(
        pass,
        format!(
            "r error {:.3}%, m error {:.3}% (< 15%); without audio r error {:.1}% (+{gap:.1} pp, > 5 pp)",
            with.r_error * 100.0,
            with.m_error * 100.0,
            without.r_error * 100.0
        ),
    )
}

fn multi_seed() -> Outcome {
    let reports: Vec<_> = (42..=46)
        .map(|seed| {
            run_recovery(&Recovery {
                system: "pendulum".into(),
                truth: recovery_truth("pendulum", 0.9).unwrap(),
                noise_fraction: 0.01,
                duration: None,
                data_seed: 7,
                train: train_cfg(seed),
            })
            .unwrap()
            .report
        })
        .collect();
    let summary = summarize_seeds(&reports).unwrap();
    for line in summary.markdown().lines() {
        println!("    {line}");
    }
    let rel = summary.rel_std[0];
    outcome(
        rel < 0.15,
        format!(
            "relative std of L over seeds 42-46: {:.3}% (< 15%)",
            rel * 100.0
        ),
    )
}

fn audio_noise() -> Outcome {
    let runs: Vec<_> = [20.0, 10.0, 5.0]
        .into_iter()
        .map(|snr| {
            let r = run_rover_audio(&RoverAudio {
                snr_db: Some(snr),
                train: train_cfg(42),
                ..RoverAudio::default()
            })
            .unwrap();
            println!("    SNR {snr:>4} dB: theta {:?}", r.report.theta_hat.values);
            r.report
        })
        .collect();
    let mut worst = 0.0f64;
    for name in ["r", "m"] {
        let i = runs[0]
            .theta_hat
            .names
            .iter()
            .position(|n| n == name)
            .unwrap();
        let v: Vec<f64> = runs.iter().map(|r| r.theta_hat.values[i]).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(spread / mean.abs());
    }
    outcome(
        worst < 0.05,
        format!(
            "max (max - min) / mean of r, m across SNR 20/10/5 dB: {:.4}% (< 5%)",
            worst * 100.0
        ),
    )
}

fn chart_line(name: &str, r: &ChartResult) -> String {
    let pct = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{:.2}%", x * 100.0))
            .collect::<Vec<_>>()
            .join("/")
    };
    format!(
        "{name}: digitized {} recon {}",
        pct(&r.digitize_rel_rmse),
        pct(&r.reconstruction_rel_rmse)
    )
}

fn digitizer_round_trip(lv_full: &ChartResult) -> Outcome {
    let sine = run_sine_chart(0.9, 0.1, &train_cfg(42)).unwrap();
    let recon_ok = |r: &ChartResult| r.reconstruction_rel_rmse.iter().all(|&e| e < 0.02);
    let pass = recon_ok(&sine) && recon_ok(lv_full) && lv_full.param_rmse < 0.1;
    outcome(
        pass,
        format!(
            "{}; {}; LV parameter RMSE {:.4} (< 0.1)",
            chart_line("sine", &sine),
            chart_line("LV", lv_full),
            lv_full.param_rmse
        ),
    )
}

fn implicit_dynamics(lv_full: &ChartResult) -> Outcome {
    let hidden = run_lotka_volterra_chart(true, &train_cfg(42)).unwrap();
    let ratio = hidden.param_rmse / lv_full.param_rmse;
    outcome(
        ratio < 3.0,
        format!(
            "parameter RMSE hidden {:.4} vs full {:.4}: ratio {ratio:.2} (< 3)",
            hidden.param_rmse, lv_full.param_rmse
        ),
    )
}

fn spectral_peak() -> Outcome {
    let samples = synth_tones(&[&|_| 440.0], 0.5, TARGET_RATE, TARGET_RATE as usize);
    let f = wav_features(&samples, TARGET_RATE).unwrap();
    let bin = TARGET_RATE as f64 / FFT_SIZE as f64;
    let worst = f.peak.iter().map(|p| (p - 440.0).abs()).fold(0.0, f64::max);
    outcome(
        worst <= bin,
        format!(
            "worst |peak - 440| = {worst:.2} Hz over {} frames (<= {bin:.2} Hz)",
            f.len()
        ),
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let run = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let titles = [
        "RK4 LED decay oracle",
        "RK4 convergence order",
        "Torricelli closed form",
        "Gradient fidelity",
        "Denormalization contract",
        "Loss properties",
        "Synthetic recovery",
        "Forced rover with audio",
        "Multi-seed protocol",
        "Audio noise robustness",
        "Digitizer round trip",
        "Hidden-state Lotka-Volterra",
        "Spectral peak",
    ];
    let mut lv_full: Option<ChartResult> = None;
    let mut lv = || {
        lv_full
            .get_or_insert_with(|| run_lotka_volterra_chart(false, &train_cfg(42)).unwrap())
            .clone()
    };
    let mut results = Vec::new();
    for (i, title) in titles.iter().enumerate() {
        let n = i + 1;
        if !run(n) {
            continue;
        }
        let started = Instant::now();
        let o = match n {
            1 => led_oracle(),
            2 => rk4_order(),
            3 => torricelli_oracle(),
            4 => gradient_fidelity(),
            5 => denormalization(),
            6 => loss_properties(),
            7 => recovery_grid(),
            8 => rover_forced(),
            9 => multi_seed(),
            10 => audio_noise(),
            11 => digitizer_round_trip(&lv()),
            12 => implicit_dynamics(&lv()),
            _ => spectral_peak(),
        };
        println!(
            "[{}] {n:>2}. {title}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
        results.push(o.pass);
    }
    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
