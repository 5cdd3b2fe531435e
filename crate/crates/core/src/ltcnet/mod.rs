//! Liquid time-constant recurrent cell with a dense readout head.
//!
//! All trainable values live in one flat vector; [`Layout`] names the
//! slices. The forward pass is generic over [`Real`] so it can be taped, and
//! [`LtcModel::forward_backward`] computes the same gradients directly in
//! f64 for training.

mod adjoint;
mod cell;
mod checkpoint;

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};

use crate::autodiff::Real;
use crate::{Error, Result};

pub const HIDDEN_DIM: usize = 64;
pub const INPUT_DIM: usize = 100;
pub const UNFOLDS: usize = 6;
pub const DROPOUT: f64 = 0.3;
/// Added to the fused-update denominator.
pub const SOLVER_EPS: f64 = 1e-8;
/// Half-width of the denormalized range, as a fraction of the nominal.
pub const DENORM_SPAN: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtcConfig {
    pub hidden: usize,
    pub input: usize,
    pub unfolds: usize,
    /// Sigmoid outputs, one per physical parameter.
    pub n_params: usize,
    /// ReLU calibration outputs.
    pub n_calib: usize,
    pub dropout: f64,
    /// Sub-step size: one input interval (1.0) split into `unfolds` steps.
    pub dt_cell: f64,
}

impl LtcConfig {
    pub fn new(n_params: usize, n_calib: usize) -> Self {
        Self {
            hidden: HIDDEN_DIM,
            input: INPUT_DIM,
            unfolds: UNFOLDS,
            n_params,
            n_calib,
            dropout: DROPOUT,
            dt_cell: 1.0 / UNFOLDS as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.input == 0 || self.unfolds == 0 {
            return Err(Error::InvalidArgument(
                "hidden, input and unfolds must be positive".into(),
            ));
        }
        if self.n_params == 0 {
            return Err(Error::InvalidArgument(
                "model needs at least one parameter output".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.dt_cell > 0.0) {
            return Err(Error::InvalidArgument("dt_cell must be positive".into()));
        }
        Ok(())
    }
}

/// Offsets of each weight block inside the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub w_in: Range<usize>,
    pub w_rec: Range<usize>,
    pub bias: Range<usize>,
    pub a: Range<usize>,
    pub log_tau: Range<usize>,
    pub param_w: Range<usize>,
    pub param_b: Range<usize>,
    pub calib_w: Range<usize>,
    pub calib_b: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &LtcConfig) -> Self {
        let (h, i, k, c) = (cfg.hidden, cfg.input, cfg.n_params, cfg.n_calib);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let w_in = take(h * i);
        let w_rec = take(h * h);
        let bias = take(h);
        let a = take(h);
        let log_tau = take(h);
        let param_w = take(k * h);
        let param_b = take(k);
        let calib_w = take(c * h);
        let calib_b = take(c);
        Self {
            w_in,
            w_rec,
            bias,
            a,
            log_tau,
            param_w,
            param_b,
            calib_w,
            calib_b,
            total: at,
        }
    }

    /// `(name, range, shape)` for every block, in storage order.
    pub fn blocks(&self, cfg: &LtcConfig) -> Vec<(&'static str, Range<usize>, Vec<usize>)> {
        let (h, i, k, c) = (cfg.hidden, cfg.input, cfg.n_params, cfg.n_calib);
        vec![
            ("w_in", self.w_in.clone(), vec![h, i]),
            ("w_rec", self.w_rec.clone(), vec![h, h]),
            ("bias", self.bias.clone(), vec![h]),
            ("a", self.a.clone(), vec![h]),
            ("log_tau", self.log_tau.clone(), vec![h]),
            ("readout_param_w", self.param_w.clone(), vec![k, h]),
            ("readout_param_b", self.param_b.clone(), vec![k]),
            ("readout_calib_w", self.calib_w.clone(), vec![c, h]),
            ("readout_calib_b", self.calib_b.clone(), vec![c]),
        ]
    }
}

/// Time-averaged readout of one input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout<R> {
    /// In (0, 1), one per physical parameter.
    pub theta_bar: Vec<R>,
    /// Non-negative calibration outputs.
    pub calib: Vec<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtcModel {
    cfg: LtcConfig,
    layout: Layout,
    weights: Vec<f64>,
}

impl LtcModel {
    /// Uniform `+-1/sqrt(fan_in)` weights, `A` in [-1, 1], `tau` in [0.5, 2]
    /// and zero readout biases.
    pub fn new<G: Rng>(cfg: LtcConfig, rng: &mut G) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let mut w = vec![0.0; layout.total];
        let cell_bound = 1.0 / ((cfg.hidden + cfg.input) as f64).sqrt();
        let head_bound = 1.0 / (cfg.hidden as f64).sqrt();
        let mut fill = |r: Range<usize>, lo: f64, hi: f64, w: &mut [f64]| {
            for v in &mut w[r] {
                *v = rng.random_range(lo..hi);
            }
        };
        fill(layout.w_in.clone(), -cell_bound, cell_bound, &mut w);
        fill(layout.w_rec.clone(), -cell_bound, cell_bound, &mut w);
        fill(layout.bias.clone(), -cell_bound, cell_bound, &mut w);
        fill(layout.a.clone(), -1.0, 1.0, &mut w);
        fill(layout.log_tau.clone(), 0.5, 2.0, &mut w);
        for v in &mut w[layout.log_tau.clone()] {
            *v = v.ln();
        }
        fill(layout.param_w.clone(), -head_bound, head_bound, &mut w);
        fill(layout.calib_w.clone(), -head_bound, head_bound, &mut w);
        Ok(Self {
            cfg,
            layout,
            weights: w,
        })
    }

    pub fn from_weights(cfg: LtcConfig, weights: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        if weights.len() != layout.total {
            return Err(Error::Dimension {
                what: "model weights",
                expected: layout.total,
                got: weights.len(),
            });
        }
        Ok(Self {
            cfg,
            layout,
            weights,
        })
    }

    pub fn config(&self) -> &LtcConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn num_weights(&self) -> usize {
        self.layout.total
    }

    pub fn tau(&self) -> Vec<f64> {
        self.weights[self.layout.log_tau.clone()]
            .iter()
            .map(|v| v.exp())
            .collect()
    }

    fn check_weights<R>(&self, w: &[R]) -> Result<()> {
        if w.len() != self.layout.total {
            return Err(Error::Dimension {
                what: "model weights",
                expected: self.layout.total,
                got: w.len(),
            });
        }
        Ok(())
    }

    fn check_inputs(&self, xs: &[Vec<f64>], dropout: Option<&[Vec<f64>]>) -> Result<()> {
        if xs.is_empty() {
            return Err(Error::TooShort { need: 1, got: 0 });
        }
        if let Some(x) = xs.iter().find(|x| x.len() != self.cfg.input) {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.cfg.input,
                got: x.len(),
            });
        }
        if let Some(m) = dropout {
            if m.len() != xs.len() {
                return Err(Error::LengthMismatch {
                    what: "dropout mask/inputs",
                    left: m.len(),
                    right: xs.len(),
                });
            }
            if let Some(r) = m.iter().find(|r| r.len() != self.cfg.hidden) {
                return Err(Error::Dimension {
                    what: "dropout mask row",
                    expected: self.cfg.hidden,
                    got: r.len(),
                });
            }
        }
        Ok(())
    }

    /// One input step: `unfolds` fused semi-implicit sub-steps from `h`.
    pub fn unfold<R: Real>(&self, w: &[R], h: &[R], x_in: &[f64]) -> Result<Vec<R>> {
        self.check_weights(w)?;
        self.check_inputs(std::slice::from_ref(&x_in.to_vec()), None)?;
        if h.len() != self.cfg.hidden {
            return Err(Error::Dimension {
                what: "hidden state",
                expected: self.cfg.hidden,
                got: h.len(),
            });
        }
        cell::unfold(&self.cfg, &self.layout, w, h, x_in)
    }

    /// Hidden states after each input, starting from `h = 0`.
    pub fn hidden_trajectory<R: Real>(&self, w: &[R], xs: &[Vec<f64>]) -> Result<Vec<Vec<R>>> {
        self.check_weights(w)?;
        self.check_inputs(xs, None)?;
        cell::hidden_trajectory(&self.cfg, &self.layout, w, xs)
    }

    /// Per-step readout averaged over time. `dropout` holds per-step,
    /// per-unit multipliers applied to the hidden state first.
    pub fn readout<R: Real>(
        &self,
        w: &[R],
        hidden: &[Vec<R>],
        dropout: Option<&[Vec<f64>]>,
    ) -> Result<Readout<R>> {
        self.check_weights(w)?;
        if hidden.is_empty() {
            return Err(Error::TooShort { need: 1, got: 0 });
        }
        Ok(cell::readout(&self.cfg, &self.layout, w, hidden, dropout))
    }

    /// Hidden trajectory then readout, with weights `w` (usually taped).
    pub fn forward_with<R: Real>(
        &self,
        w: &[R],
        xs: &[Vec<f64>],
        dropout: Option<&[Vec<f64>]>,
    ) -> Result<Readout<R>> {
        self.check_weights(w)?;
        self.check_inputs(xs, dropout)?;
        let hidden = cell::hidden_trajectory(&self.cfg, &self.layout, w, xs)?;
        Ok(cell::readout(&self.cfg, &self.layout, w, &hidden, dropout))
    }

    /// Plain forward pass with the model's own weights.
    pub fn forward(&self, xs: &[Vec<f64>], dropout: Option<&[Vec<f64>]>) -> Result<Readout<f64>> {
        self.forward_with(&self.weights, xs, dropout)
    }

    /// Forward pass, then accumulates into `grad` the gradient of
    /// `g_theta . theta_bar + g_calib . calib` with respect to the weights.
    pub fn forward_backward(
        &self,
        xs: &[Vec<f64>],
        dropout: Option<&[Vec<f64>]>,
        g_theta: &[f64],
        g_calib: &[f64],
        grad: &mut [f64],
    ) -> Result<Readout<f64>> {
        self.check_inputs(xs, dropout)?;
        if g_theta.len() != self.cfg.n_params || g_calib.len() != self.cfg.n_calib {
            return Err(Error::Dimension {
                what: "readout seed",
                expected: self.cfg.n_params + self.cfg.n_calib,
                got: g_theta.len() + g_calib.len(),
            });
        }
        self.check_weights(grad)?;
        adjoint::forward_backward(
            &self.cfg,
            &self.layout,
            &self.weights,
            xs,
            dropout,
            g_theta,
            g_calib,
            grad,
        )
    }
}

/// Inverted-dropout multipliers: each entry is 0 with probability `p`,
/// otherwise `1 / (1 - p)`.
pub fn dropout_mask<G: Rng>(rng: &mut G, steps: usize, hidden: usize, p: f64) -> Vec<Vec<f64>> {
    let keep = 1.0 / (1.0 - p);
    (0..steps)
        .map(|_| {
            (0..hidden)
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                .collect()
        })
        .collect()
}

/// `theta_k = (1 + (0.5 - theta_bar_k) * 0.95) * nominal_k`
pub fn denormalize<R: Real>(theta_bar: &[R], nominal: &[f64]) -> Result<Vec<R>> {
    if theta_bar.len() != nominal.len() {
        return Err(Error::Dimension {
            what: "normalized parameters",
            expected: nominal.len(),
            got: theta_bar.len(),
        });
    }
    Ok(theta_bar
        .iter()
        .zip(nominal)
        .map(|(&tb, &n)| ((-tb + 0.5) * DENORM_SPAN + 1.0) * n)
        .collect())
}

/// Inverse of [`denormalize`] for one parameter.
pub fn normalize(theta: f64, nominal: f64) -> f64 {
    0.5 - (theta / nominal - 1.0) / DENORM_SPAN
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> LtcConfig {
        LtcConfig {
            hidden: 8,
            input: 5,
            ..LtcConfig::new(2, 2)
        }
    }

    fn inputs(t: usize, i: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..t)
            .map(|_| (0..i).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn init_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = LtcModel::new(LtcConfig::new(2, 1), &mut rng).unwrap();
        let l = m.layout();
        assert_eq!(l.total, 6400 + 4096 + 3 * 64 + 2 * 64 + 2 + 64 + 1);
        assert!(m.tau().iter().all(|&t| (0.5..2.0).contains(&t)));
        let b = 1.0 / 164f64.sqrt();
        assert!(m.weights()[l.w_in.clone()].iter().all(|v| v.abs() <= b));
        assert!(m.weights()[l.param_b.clone()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn denormalize_examples() {
        let n = [0.9];
        assert_eq!(denormalize(&[0.5], &n).unwrap(), vec![0.9]);
        assert!((denormalize(&[0.0], &[1.0]).unwrap()[0] - 1.475).abs() < 1e-15);
        assert!((denormalize(&[1.0], &[1.0]).unwrap()[0] - 0.525).abs() < 1e-15);
        let l = denormalize(&[0.5211], &n).unwrap()[0];
        assert!((l - 0.9 * (1.0 - 0.0211 * 0.95)).abs() < 1e-15);
        assert!((l - 0.882).abs() < 5e-4);
        assert!((normalize(l, 0.9) - 0.5211).abs() < 1e-12);
    }

    #[test]
    fn zero_readout_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = LtcModel::new(small_cfg(), &mut rng).unwrap();
        let l = m.layout().clone();
        for r in [l.param_w, l.param_b, l.calib_w, l.calib_b] {
            m.weights_mut()[r].fill(0.0);
        }
        let out = m.forward(&inputs(4, 5, 3), None).unwrap();
        assert_eq!(out.theta_bar, vec![0.5, 0.5]);
        assert_eq!(out.calib, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_state_zero_a_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = LtcModel::new(small_cfg(), &mut rng).unwrap();
        let a = m.layout().a.clone();
        m.weights_mut()[a].fill(0.0);
        let h = m.unfold(m.weights(), &[0.0; 8], &[0.3; 5]).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_matches_tape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = LtcModel::new(small_cfg(), &mut rng).unwrap();
        let xs = inputs(6, 5, 6);
        let mask = dropout_mask(&mut rng, 6, 8, 0.3);
        let (gt, gc) = ([0.7, -1.3], [0.4, 2.0]);

        let mut grad = vec![0.0; m.num_weights()];
        let out = m
            .forward_backward(&xs, Some(&mask), &gt, &gc, &mut grad)
            .unwrap();

        let tape = Tape::new();
        let w = tape.vars(m.weights());
        let r = m.forward_with(&w, &xs, Some(&mask)).unwrap();
        let s = Real::dot_const(&r.theta_bar, &gt) + Real::dot_const(&r.calib, &gc);
        let g = tape.backward(s).wrt_all(&w);
        for (a, b) in out.theta_bar.iter().zip(&r.theta_bar) {
            assert_eq!(*a, b.value());
        }
        for (i, (a, b)) in grad.iter().zip(&g).enumerate() {
            assert!(
                (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                "weight {i}: {a} vs {b}"
            );
        }
    }
}
