use super::{Layout, LtcConfig, Readout, SOLVER_EPS};
use crate::autodiff::Real;
use crate::{Error, Result};

/// `W_in x + b`, computed once per input step.
pub(super) fn input_drive<R: Real>(cfg: &LtcConfig, l: &Layout, w: &[R], x: &[f64]) -> Vec<R> {
    let w_in = &w[l.w_in.clone()];
    let b = &w[l.bias.clone()];
    (0..cfg.hidden)
        .map(|j| R::dot_const(&w_in[j * cfg.input..(j + 1) * cfg.input], x) + b[j])
        .collect()
}

pub(super) fn inv_tau<R: Real>(l: &Layout, w: &[R]) -> Vec<R> {
    w[l.log_tau.clone()].iter().map(|&v| (-v).exp()).collect()
}

/// One fused semi-implicit sub-step:
/// `h' = (h + dt f A) / (1 + dt (1/tau + f) + eps)`, `f = sigmoid(2 (W_rec h + p))`.
pub(super) fn substep<R: Real>(
    cfg: &LtcConfig,
    l: &Layout,
    w: &[R],
    h: &[R],
    drive: &[R],
    inv_tau: &[R],
) -> Result<Vec<R>> {
    let n = cfg.hidden;
    let w_rec = &w[l.w_rec.clone()];
    let a = &w[l.a.clone()];
    let dt = cfg.dt_cell;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let z = R::dot(&w_rec[j * n..(j + 1) * n], h) + drive[j];
        let f = (z * 2.0).sigmoid();
        let num = h[j] + f * a[j] * dt;
        let den = (inv_tau[j] + f) * dt + (1.0 + SOLVER_EPS);
        let next = num / den;
        if !next.is_finite() {
            return Err(Error::NonFiniteHidden { unit: j });
        }
        out.push(next);
    }
    Ok(out)
}

pub(super) fn unfold<R: Real>(
    cfg: &LtcConfig,
    l: &Layout,
    w: &[R],
    h: &[R],
    x: &[f64],
) -> Result<Vec<R>> {
    let drive = input_drive(cfg, l, w, x);
    let it = inv_tau(l, w);
    let mut h = h.to_vec();
    for _ in 0..cfg.unfolds {
        h = substep(cfg, l, w, &h, &drive, &it)?;
    }
    Ok(h)
}

pub(super) fn hidden_trajectory<R: Real>(
    cfg: &LtcConfig,
    l: &Layout,
    w: &[R],
    xs: &[Vec<f64>],
) -> Result<Vec<Vec<R>>> {
    let it = inv_tau(l, w);
    let mut h = vec![R::cst(0.0); cfg.hidden];
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let drive = input_drive(cfg, l, w, x);
        for _ in 0..cfg.unfolds {
            h = substep(cfg, l, w, &h, &drive, &it)?;
        }
        out.push(h.clone());
    }
    Ok(out)
}

pub(super) fn readout<R: Real>(
    cfg: &LtcConfig,
    l: &Layout,
    w: &[R],
    hidden: &[Vec<R>],
    dropout: Option<&[Vec<f64>]>,
) -> Readout<R> {
    let n = cfg.hidden;
    let (k, c) = (cfg.n_params, cfg.n_calib);
    let pw = &w[l.param_w.clone()];
    let pb = &w[l.param_b.clone()];
    let cw = &w[l.calib_w.clone()];
    let cb = &w[l.calib_b.clone()];
    let mut yp: Vec<Vec<R>> = vec![Vec::with_capacity(hidden.len()); k];
    let mut yc: Vec<Vec<R>> = vec![Vec::with_capacity(hidden.len()); c];
    for (t, h) in hidden.iter().enumerate() {
        let hd: Vec<R> = match dropout {
            Some(m) => h.iter().zip(&m[t]).map(|(&v, &s)| v * s).collect(),
            None => h.clone(),
        };
        for i in 0..k {
            let z = R::dot(&pw[i * n..(i + 1) * n], &hd) + pb[i];
            yp[i].push(z.sigmoid());
        }
        for i in 0..c {
            let z = R::dot(&cw[i * n..(i + 1) * n], &hd) + cb[i];
            yc[i].push(z.relu());
        }
    }
    let inv_t = 1.0 / hidden.len() as f64;
    Readout {
        theta_bar: yp.iter().map(|s| R::sum(s) * inv_t).collect(),
        calib: yc.iter().map(|s| R::sum(s) * inv_t).collect(),
    }
}
