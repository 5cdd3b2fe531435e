use physid::ltcnet::{denormalize, normalize, LtcConfig, LtcModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(seed: u64) -> LtcModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LtcModel::new(LtcConfig::new(2, 3), &mut rng).unwrap()
}

fn inputs(seed: u64, steps: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

proptest! {
    #[test]
    fn denormalized_values_stay_in_range(tb in 0.0f64..=1.0, nominal in 1e-3f64..100.0) {
        let theta = denormalize(&[tb], &[nominal]).unwrap()[0];
        prop_assert!(theta >= 0.525 * nominal * (1.0 - 1e-12));
        prop_assert!(theta <= 1.475 * nominal * (1.0 + 1e-12));
    }

    #[test]
    fn denormalize_is_strictly_decreasing(a in 0.0f64..1.0, gap in 1e-6f64..1.0, nominal in 1e-3f64..100.0) {
        let b = (a + gap).min(1.0);
        prop_assume!(b > a);
        let ta = denormalize(&[a], &[nominal]).unwrap()[0];
        let tb = denormalize(&[b], &[nominal]).unwrap()[0];
        prop_assert!(tb < ta);
    }

    #[test]
    fn normalize_inverts_denormalize(tb in 0.0f64..=1.0, nominal in 1e-3f64..100.0) {
        let theta = denormalize(&[tb], &[nominal]).unwrap()[0];
        prop_assert!((normalize(theta, nominal) - tb).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn forward_without_dropout_is_deterministic(seed in 0u64..1000) {
        let m = model(seed);
        let xs = inputs(seed, 12, m.config().input);
        prop_assert_eq!(m.forward(&xs, None).unwrap(), m.forward(&xs, None).unwrap());
    }

    #[test]
    fn readout_ignores_time_order(seed in 0u64..1000) {
        let m = model(seed);
        let xs = inputs(seed + 1, 10, m.config().input);
        let hidden = m.hidden_trajectory(m.weights(), &xs).unwrap();
        let mut reversed = hidden.clone();
        reversed.reverse();
        let a = m.readout(m.weights(), &hidden, None).unwrap();
        let b = m.readout(m.weights(), &reversed, None).unwrap();
        for (x, y) in a.theta_bar.iter().zip(&b.theta_bar).chain(a.calib.iter().zip(&b.calib)) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn denormalize_fixed_points() {
    assert_eq!(denormalize(&[0.5], &[0.9]).unwrap()[0], 0.9);
    assert!((denormalize(&[0.0], &[1.0]).unwrap()[0] - 1.475).abs() < 1e-15);
    assert!((denormalize(&[1.0], &[1.0]).unwrap()[0] - 0.525).abs() < 1e-15);
    assert!((denormalize(&[0.5211], &[0.90]).unwrap()[0] - 0.882).abs() < 5e-4);
}

#[test]
fn zero_readout_weights_give_midpoints_and_zero_calibration() {
    let mut m = model(3);
    let layout = m.layout().clone();
    for r in [
        layout.param_w,
        layout.param_b,
        layout.calib_w,
        layout.calib_b,
    ] {
        m.weights_mut()[r].fill(0.0);
    }
    let out = m.forward(&inputs(4, 5, m.config().input), None).unwrap();
    assert!(out.theta_bar.iter().all(|&v| v == 0.5));
    assert!(out.calib.iter().all(|&v| v == 0.0));
}

#[test]
fn hidden_state_stays_bounded_under_long_random_drive() {
    let m = model(11);
    let a_max = m.weights()[m.layout().a.clone()]
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let xs = inputs(12, 10_000, m.config().input);
    let hidden = m.hidden_trajectory(m.weights(), &xs).unwrap();
    let worst = hidden
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    assert!(worst <= a_max + 1e-12, "{worst} > {a_max}");
}
