//! Trajectory loss with measurement masking and calibration offsets, bound
//! penalties on physical parameters, and their weighted sum.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::{Error, Result};

pub const DEFAULT_LAMBDA_PARAM: f64 = 1.0;
pub const DEFAULT_PENALTY_WEIGHT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub traj: f64,
    pub param_penalty: f64,
    pub total: f64,
    pub lambda_param: f64,
}

/// Per-parameter weights of the positivity, lower-bound and upper-bound terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub positive: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PenaltyWeights {
    pub fn uniform(k: usize, w: f64) -> Self {
        Self {
            positive: vec![w; k],
            lower: vec![w; k],
            upper: vec![w; k],
        }
    }

    pub fn len(&self) -> usize {
        self.positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    fn validate(&self, k: usize) -> Result<()> {
        for (what, w) in [
            ("positivity weights", &self.positive),
            ("lower-bound weights", &self.lower),
            ("upper-bound weights", &self.upper),
        ] {
            if w.len() != k {
                return Err(Error::Dimension {
                    what,
                    expected: k,
                    got: w.len(),
                });
            }
            if w.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "{what} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// `sum_i M_ii / T * sum_t (x_i(t) - gamma_i - sim_i(t))^2`
///
/// `measured` and `simulated` are `T x D` row-major. `gamma[i]` must be zero
/// for channels without a calibration offset.
pub fn traj_loss<R: Real>(
    measured: &[Vec<f64>],
    simulated: &[Vec<R>],
    mask: &[bool],
    gamma: &[R],
) -> Result<R> {
    if measured.len() != simulated.len() {
        return Err(Error::LengthMismatch {
            what: "measured/simulated",
            left: measured.len(),
            right: simulated.len(),
        });
    }
    if measured.is_empty() {
        return Err(Error::TooShort { need: 1, got: 0 });
    }
    let d = mask.len();
    if gamma.len() != d {
        return Err(Error::Dimension {
            what: "calibration offsets",
            expected: d,
            got: gamma.len(),
        });
    }
    for (m, s) in measured.iter().zip(simulated) {
        if m.len() != d || s.len() != d {
            return Err(Error::Dimension {
                what: "trajectory row",
                expected: d,
                got: if m.len() != d { m.len() } else { s.len() },
            });
        }
    }
    let inv_t = 1.0 / measured.len() as f64;
    let mut per_channel = Vec::with_capacity(d);
    for i in (0..d).filter(|&i| mask[i]) {
        let resid: Vec<R> = measured
            .iter()
            .zip(simulated)
            .map(|(m, s)| -(s[i] + gamma[i]) + m[i])
            .collect();
        per_channel.push(R::dot(&resid, &resid) * inv_t);
    }
    Ok(R::sum(&per_channel))
}

/// `sum_i w_p ReLU(-theta_i) + w_l ReLU(l_i - theta_i) + w_up ReLU(theta_i - up_i)`
pub fn param_penalty<R: Real>(
    theta: &[R],
    lower: &[f64],
    upper: &[f64],
    weights: &PenaltyWeights,
) -> Result<R> {
    let k = theta.len();
    for (what, v) in [("lower bounds", lower), ("upper bounds", upper)] {
        if v.len() != k {
            return Err(Error::Dimension {
                what,
                expected: k,
                got: v.len(),
            });
        }
    }
    weights.validate(k)?;
    let mut acc = R::cst(0.0);
    for i in 0..k {
        let t = theta[i];
        acc = acc
            + (-t).relu() * weights.positive[i]
            + (-t + lower[i]).relu() * weights.lower[i]
            + (t - upper[i]).relu() * weights.upper[i];
    }
    Ok(acc)
}

/// `traj + lambda_param * penalty`, on any scalar type.
pub fn combine<R: Real>(traj: R, penalty: R, lambda_param: f64) -> R {
    traj + penalty * lambda_param
}

pub fn total_loss(traj: f64, penalty: f64, lambda_param: f64) -> Result<LossBreakdown> {
    if !(lambda_param >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_param must be non-negative, got {lambda_param}"
        )));
    }
    Ok(LossBreakdown {
        traj,
        param_penalty: penalty,
        total: combine(traj, penalty, lambda_param),
        lambda_param,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(cols: &[&[f64]]) -> Vec<Vec<f64>> {
        (0..cols[0].len())
            .map(|t| cols.iter().map(|c| c[t]).collect())
            .collect()
    }

    #[test]
    fn identical_is_zero() {
        let m = rows(&[&[1.0, 2.0, 3.0], &[0.0, 1.0, 0.0]]);
        assert_eq!(traj_loss(&m, &m, &[true, true], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn offset_absorbed_by_gamma() {
        let sim = rows(&[&[1.0, 2.0, 3.0], &[0.0, 1.0, 0.0]]);
        let meas = rows(&[&[1.7, 2.7, 3.7], &[0.0, 1.0, 0.0]]);
        assert!(traj_loss(&meas, &sim, &[true, true], &[0.0, 0.0]).unwrap() > 0.0);
        let l = traj_loss(&meas, &sim, &[true, true], &[0.7, 0.0]).unwrap();
        assert!(l < 1e-28, "{l}");
    }

    #[test]
    fn masked_channel_ignored() {
        let sim = rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let meas = rows(&[&[1.5, 2.0], &[99.0, -5.0]]);
        assert_eq!(
            traj_loss(&meas, &sim, &[true, false], &[0.0, 0.0]).unwrap(),
            0.125
        );
    }

    #[test]
    fn length_mismatch() {
        let a = rows(&[&[1.0, 2.0]]);
        let b = rows(&[&[1.0]]);
        assert!(traj_loss(&a, &b, &[true], &[0.0]).is_err());
    }

    #[test]
    fn penalty_examples() {
        let w = PenaltyWeights {
            positive: vec![1.0],
            lower: vec![0.0],
            upper: vec![0.0],
        };
        let p = param_penalty(&[-0.1], &[-1.0], &[1.0], &w).unwrap();
        assert!((p - 0.1).abs() < 1e-15);
        let w = PenaltyWeights {
            positive: vec![0.0],
            lower: vec![0.0],
            upper: vec![2.0],
        };
        let p = param_penalty(&[1.3], &[0.1], &[1.0], &w).unwrap();
        assert!((p - 0.6).abs() < 1e-12);
        let w = PenaltyWeights::uniform(2, 10.0);
        assert_eq!(
            param_penalty(&[0.5, 2.0], &[0.1, 1.0], &[1.0, 3.0], &w).unwrap(),
            0.0
        );
    }

    #[test]
    fn total_examples() {
        assert_eq!(total_loss(1.0, 0.0, 1.0).unwrap().total, 1.0);
        assert_eq!(total_loss(0.0, 0.5, 2.0).unwrap().total, 1.0);
        assert_eq!(total_loss(0.3, 7.0, 0.0).unwrap().total, 0.3);
        assert!(total_loss(0.3, 7.0, -1.0).is_err());
    }
}
