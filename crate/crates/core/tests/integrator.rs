use physid::dynamics::registry_lookup;
use physid::integrator::{integrate, read_csv_trajectory, simulate, write_csv_trajectory};
use physid::trainer::check::check_rollouts;
use proptest::prelude::*;

fn pendulum_at(t_end: f64, dt: f64) -> Vec<f64> {
    let spec = registry_lookup("pendulum").unwrap();
    let steps = (t_end / dt).round() as usize;
    let r = integrate(&spec, &[1.0, 0.0], None, &[0.9, 0.3], 0.0, dt, steps).unwrap();
    r.final_state().to_vec()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn rk4_is_fourth_order() {
    let reference = pendulum_at(2.0, 0.02 / 64.0);
    let errs: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| dist(&pendulum_at(2.0, dt), &reference))
        .collect();
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((3.7..=4.3).contains(&rate), "rate {rate}");
    }
}

#[test]
fn led_matches_exponential_decay() {
    let spec = registry_lookup("led").unwrap();
    let r = integrate(&spec, &[1.0], None, &[1.0], 0.0, 0.01, 100).unwrap();
    assert!((r.final_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
}

#[test]
fn rollout_gradients_match_finite_differences() {
    for c in check_rollouts().unwrap() {
        assert!(c.passed(), "{} {:.3e}", c.name, c.max_rel_error);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn torricelli_matches_closed_form(h0 in 0.01f64..0.2, k in 0.005f64..0.03) {
        let spec = registry_lookup("torricelli").unwrap();
        let dt = 0.005;
        let r = integrate(&spec, &[h0], None, &[k], 0.0, dt, 4000).unwrap();
        for (i, s) in r.states.iter().enumerate() {
            let t = i as f64 * dt;
            let exact = (h0.sqrt() - k * t / 2.0).max(0.0).powi(2);
            prop_assert!((s[0] - exact).abs() < 1e-6, "t={t}: {} vs {exact}", s[0]);
        }
    }

    #[test]
    fn csv_round_trip_is_exact(h0 in 0.01f64..1.0, fps in 5.0f64..60.0) {
        let spec = registry_lookup("pendulum").unwrap();
        let traj = simulate(&spec, &[h0, 0.0], None, &spec.theta_nominal, 2.0, fps).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv_trajectory(&path, &traj).unwrap();
        let back = read_csv_trajectory(&path).unwrap();
        prop_assert_eq!(back.timestamps(), traj.timestamps());
        prop_assert_eq!(back.states(), traj.states());
    }
}
