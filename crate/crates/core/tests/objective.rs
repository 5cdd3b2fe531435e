use physid::autodiff::Tape;
use physid::objective::{combine, param_penalty, total_loss, traj_loss, PenaltyWeights};
use physid::trainer::check::check_loss;
use proptest::prelude::*;

fn rows(flat: &[f64], d: usize) -> Vec<Vec<f64>> {
    flat.chunks(d).map(<[f64]>::to_vec).collect()
}

fn series() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (2usize..30).prop_flat_map(|t| {
        (
            prop::collection::vec(-5.0f64..5.0, t * 3),
            prop::collection::vec(-5.0f64..5.0, t * 3),
        )
            .prop_map(|(m, s)| (rows(&m, 3), rows(&s, 3)))
    })
}

fn penalty(theta: &[f64]) -> f64 {
    let lower = [0.1, 0.2];
    let upper = [2.0, 1.0];
    param_penalty(theta, &lower, &upper, &PenaltyWeights::uniform(2, 10.0)).unwrap()
}

proptest! {
    #[test]
    fn unmeasured_channels_do_not_matter((m, s) in series(), junk in prop::collection::vec(-1e3f64..1e3, 2)) {
        let mask = [true, false, false];
        let gamma = [0.0; 3];
        let base = traj_loss(&m, &s, &mask, &gamma).unwrap();
        let mut m2 = m.clone();
        let mut s2 = s.clone();
        for (a, b) in m2.iter_mut().zip(&mut s2) {
            a[1] += junk[0];
            b[2] -= junk[1];
        }
        prop_assert_eq!(base, traj_loss(&m2, &s2, &mask, &gamma).unwrap());
    }

    #[test]
    fn offsets_shift_the_measurements((m, s) in series(), gamma in prop::collection::vec(-3.0f64..3.0, 3)) {
        let mask = [true, true, false];
        let shifted: Vec<Vec<f64>> = m.iter().map(|r| r.iter().zip(&gamma).map(|(v, g)| v - g).collect()).collect();
        let a = traj_loss(&m, &s, &mask, &gamma).unwrap();
        let b = traj_loss(&shifted, &s, &mask, &[0.0; 3]).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn offset_absorbs_a_constant_bias(s in prop::collection::vec(-5.0f64..5.0, 20), bias in -2.0f64..2.0) {
        let sim = rows(&s, 2);
        let meas: Vec<Vec<f64>> = sim.iter().map(|r| vec![r[0] + bias, r[1]]).collect();
        let loss = traj_loss(&meas, &sim, &[true, true], &[bias, 0.0]).unwrap();
        prop_assert!(loss < 1e-24);
    }

    #[test]
    fn penalty_vanishes_on_the_box(a in 0.1f64..=2.0, b in 0.2f64..=1.0) {
        prop_assert_eq!(penalty(&[a, b]), 0.0);
    }

    #[test]
    fn penalty_is_positive_outside_the_box(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        prop_assume!(!(0.1..=2.0).contains(&a) || !(0.2..=1.0).contains(&b));
        prop_assert!(penalty(&[a, b]) > 0.0);
    }

    #[test]
    fn penalty_is_convex(x in prop::collection::vec(-5.0f64..5.0, 2), y in prop::collection::vec(-5.0f64..5.0, 2), w in 0.0f64..=1.0) {
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        let bound = w * penalty(&x) + (1.0 - w) * penalty(&y);
        prop_assert!(penalty(&mid) <= bound + 1e-9 * (1.0 + bound));
    }

    #[test]
    fn penalty_is_linear_between_kinks(x in prop::collection::vec(-5.0f64..5.0, 2), d in prop::collection::vec(-1.0f64..1.0, 2)) {
        let h = 1e-3;
        let kinks = [[0.0, 0.1, 2.0], [0.0, 0.2, 1.0]];
        let crosses = (0..2).any(|i| {
            let (lo, hi) = (x[i].min(x[i] + 2.0 * h * d[i]), x[i].max(x[i] + 2.0 * h * d[i]));
            kinks[i].iter().any(|k| (lo..=hi).contains(k))
        });
        prop_assume!(!crosses);
        let at = |s: f64| penalty(&[x[0] + s * d[0], x[1] + s * d[1]]);
        let second = at(2.0 * h) - 2.0 * at(h) + at(0.0);
        prop_assert!(second.abs() < 1e-9);
    }

    #[test]
    fn total_is_traj_plus_weighted_penalty(traj in 0.0f64..10.0, pen in 0.0f64..10.0, lambda in 0.0f64..5.0) {
        let b = total_loss(traj, pen, lambda).unwrap();
        prop_assert_eq!(b.total.to_bits(), (traj + lambda * pen).to_bits());
        prop_assert_eq!(combine(traj, pen, lambda).to_bits(), b.total.to_bits());
    }
}

#[test]
fn taped_penalty_slopes_are_sums_of_weights() {
    let tape = Tape::new();
    let theta = tape.vars(&[-0.5, 3.0]);
    let p = param_penalty(
        &theta,
        &[0.1, 0.2],
        &[2.0, 1.0],
        &PenaltyWeights::uniform(2, 10.0),
    )
    .unwrap();
    assert_eq!(p.value(), 10.0 * 0.5 + 10.0 * 0.6 + 10.0 * 2.0);
    assert_eq!(tape.backward(p).wrt_all(&theta), vec![-20.0, 10.0]);
}

#[test]
fn loss_gradients_match_finite_differences() {
    for c in check_loss(42).unwrap() {
        assert!(c.passed(), "{} {:.3e}", c.name, c.max_rel_error);
    }
}
