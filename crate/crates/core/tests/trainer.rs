use physid::dynamics::registry_lookup;
use physid::synth::synthesize;
use physid::trainer::{cosine_lr, summarize_seeds, train, EstimateReport, TrainConfig, TrainData};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn led_data() -> (physid::dynamics::SystemSpec, TrainData) {
    let spec = registry_lookup("led")
        .unwrap()
        .with_nominal(&[1.1])
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let obs = synthesize(&spec, &[0.92], &[1.0], None, 2.0, 30.0, 0.0, &mut rng).unwrap();
    let data = TrainData::from_observations(&spec, obs, None).unwrap();
    (spec, data)
}

fn quick(seed: u64, epochs: usize, patience: usize) -> TrainConfig {
    TrainConfig {
        seed,
        max_epochs: epochs,
        patience,
        ..TrainConfig::default()
    }
}

fn without_clock(mut r: EstimateReport) -> EstimateReport {
    r.wall_clock_s = 0.0;
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn best_loss_never_increases_and_stopping_waits_for_patience(seed in 0u64..1000, patience in 1usize..5) {
        let (spec, data) = led_data();
        let cfg = TrainConfig { lr: 0.05, ..quick(seed, 15, patience) };
        let r = train(&spec, &data, &cfg).unwrap().report;
        let curve = &r.loss_curve;
        prop_assert!(curve.windows(2).all(|w| w[1].best_traj <= w[0].best_traj));
        let mut last_improvement = 0;
        for (e, rec) in curve.iter().enumerate() {
            if e > 0 && rec.best_traj < curve[e - 1].best_traj {
                last_improvement = e;
            }
            if e + 1 < curve.len() {
                prop_assert!(e - last_improvement < patience);
            }
        }
        if r.stopped_early {
            prop_assert!(curve.len() - 1 - last_improvement >= patience);
        }
        prop_assert_eq!(r.best_epoch, last_improvement);
    }
}

#[test]
fn same_seed_reproduces_the_report() {
    let (spec, data) = led_data();
    let a = train(&spec, &data, &quick(42, 5, 40)).unwrap();
    let b = train(&spec, &data, &quick(42, 5, 40)).unwrap();
    assert_eq!(without_clock(a.report), without_clock(b.report));
    assert_eq!(a.model.weights(), b.model.weights());
}

#[test]
fn different_seeds_differ() {
    let (spec, data) = led_data();
    let a = train(&spec, &data, &quick(42, 3, 40)).unwrap().report;
    let b = train(&spec, &data, &quick(43, 3, 40)).unwrap().report;
    assert_ne!(a.loss_curve[0].train_loss, b.loss_curve[0].train_loss);
}

#[test]
fn stalls_stop_exactly_after_patience() {
    let (spec, data) = led_data();
    let cfg = TrainConfig {
        min_delta: 1e9,
        ..quick(1, 50, 3)
    };
    let r = train(&spec, &data, &cfg).unwrap().report;
    assert!(r.stopped_early);
    assert_eq!(r.best_epoch, 0);
    assert_eq!(r.epochs_run, 4);
}

#[test]
fn learning_rate_follows_warm_restarts() {
    let cfg = TrainConfig::default();
    assert_eq!(cosine_lr(0, &cfg), cfg.lr);
    assert_eq!(cosine_lr(cfg.t0, &cfg), cfg.lr);
    assert_eq!(cosine_lr(cfg.t0 + cfg.t0 * cfg.t_mult, &cfg), cfg.lr);
    for e in 1..cfg.t0 {
        assert!(cosine_lr(e, &cfg) < cosine_lr(e - 1, &cfg));
        assert!(cosine_lr(e, &cfg) >= cfg.eta_min);
    }
}

#[test]
fn seed_summary_reports_mean_and_spread() {
    let (spec, data) = led_data();
    let reports: Vec<EstimateReport> = (42..45)
        .map(|s| train(&spec, &data, &quick(s, 3, 40)).unwrap().report)
        .collect();
    let summary = summarize_seeds(&reports).unwrap();
    let md = summary.markdown();
    assert!(md.contains('±'), "{md}");
}
