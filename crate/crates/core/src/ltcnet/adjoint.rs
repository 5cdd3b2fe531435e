//! Hand-derived reverse pass of the cell and readout in plain f64.
//!
//! Mirrors `cell.rs` operation for operation; forward values match
//! the generic path exactly.

use super::cell::{input_drive, inv_tau};
use super::{Layout, LtcConfig, Readout, SOLVER_EPS};
use crate::autodiff::Real;
use crate::{Error, Result};

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(acc: &mut [f64], s: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += s * v;
    }
}

struct Sub {
    h_in: Vec<f64>,
    f: Vec<f64>,
    den: Vec<f64>,
    h_out: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub(super) fn forward_backward(
    cfg: &LtcConfig,
    l: &Layout,
    w: &[f64],
    xs: &[Vec<f64>],
    dropout: Option<&[Vec<f64>]>,
    g_theta: &[f64],
    g_calib: &[f64],
    grad: &mut [f64],
) -> Result<Readout<f64>> {
    let n = cfg.hidden;
    let ni = cfg.input;
    let (k, c) = (cfg.n_params, cfg.n_calib);
    let dt = cfg.dt_cell;
    let steps = xs.len();
    let inv_t = 1.0 / steps as f64;

    let w_rec = &w[l.w_rec.clone()];
    let a = &w[l.a.clone()];
    let pw = &w[l.param_w.clone()];
    let pb = &w[l.param_b.clone()];
    let cw = &w[l.calib_w.clone()];
    let cb = &w[l.calib_b.clone()];
    let it: Vec<f64> = inv_tau(l, w);

    // forward, keeping every sub-step
    let mut subs: Vec<Sub> = Vec::with_capacity(steps * cfg.unfolds);
    let mut hd_all: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut yp_all: Vec<Vec<f64>> = vec![Vec::with_capacity(steps); k];
    let mut zc_all: Vec<Vec<f64>> = vec![Vec::with_capacity(steps); c];
    let mut h = vec![0.0; n];
    for (t, x) in xs.iter().enumerate() {
        let drive: Vec<f64> = input_drive(cfg, l, w, x);
        for _ in 0..cfg.unfolds {
            let mut f = vec![0.0; n];
            let mut den = vec![0.0; n];
            let mut out = vec![0.0; n];
            for j in 0..n {
                let z = dot(&w_rec[j * n..(j + 1) * n], &h) + drive[j];
                let fj = (z * 2.0).sigmoid();
                let num = h[j] + fj * a[j] * dt;
                let d = (it[j] + fj) * dt + (1.0 + SOLVER_EPS);
                let next = num / d;
                if !next.is_finite() {
                    return Err(Error::NonFiniteHidden { unit: j });
                }
                f[j] = fj;
                den[j] = d;
                out[j] = next;
            }
            let h_in = std::mem::replace(&mut h, out.clone());
            subs.push(Sub {
                h_in,
                f,
                den,
                h_out: out,
            });
        }
        let hd: Vec<f64> = match dropout {
            Some(m) => h.iter().zip(&m[t]).map(|(&v, &s)| v * s).collect(),
            None => h.clone(),
        };
        for i in 0..k {
            let z = dot(&pw[i * n..(i + 1) * n], &hd) + pb[i];
            yp_all[i].push(z.sigmoid());
        }
        for i in 0..c {
            zc_all[i].push(dot(&cw[i * n..(i + 1) * n], &hd) + cb[i]);
        }
        hd_all.push(hd);
    }
    let readout = Readout {
        theta_bar: yp_all.iter().map(|s| f64::sum(s) * inv_t).collect(),
        calib: zc_all
            .iter()
            .map(|s| {
                let r: Vec<f64> = s.iter().map(|&z| z.relu()).collect();
                f64::sum(&r) * inv_t
            })
            .collect(),
    };

    // reverse
    let (g_win, rest) = grad.split_at_mut(l.w_rec.start);
    let g_win = &mut g_win[l.w_in.clone()];
    let (g_rec, rest) = rest.split_at_mut(n * n);
    let (g_b, rest) = rest.split_at_mut(n);
    let (g_a, rest) = rest.split_at_mut(n);
    let (g_lt, rest) = rest.split_at_mut(n);
    let (g_pw, rest) = rest.split_at_mut(k * n);
    let (g_pb, rest) = rest.split_at_mut(k);
    let (g_cw, g_cb) = rest.split_at_mut(c * n);

    let mut dh = vec![0.0; n];
    let mut dz = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for t in (0..steps).rev() {
        let hd = &hd_all[t];
        let mut dhd = vec![0.0; n];
        for i in 0..k {
            let y = yp_all[i][t];
            let dzp = g_theta[i] * inv_t * y * (1.0 - y);
            if dzp != 0.0 {
                axpy(&mut g_pw[i * n..(i + 1) * n], dzp, hd);
                g_pb[i] += dzp;
                axpy(&mut dhd, dzp, &pw[i * n..(i + 1) * n]);
            }
        }
        for i in 0..c {
            if zc_all[i][t] > 0.0 {
                let dzc = g_calib[i] * inv_t;
                axpy(&mut g_cw[i * n..(i + 1) * n], dzc, hd);
                g_cb[i] += dzc;
                axpy(&mut dhd, dzc, &cw[i * n..(i + 1) * n]);
            }
        }
        match dropout {
            Some(m) => {
                for j in 0..n {
                    dh[j] += dhd[j] * m[t][j];
                }
            }
            None => {
                for j in 0..n {
                    dh[j] += dhd[j];
                }
            }
        }

        dp.fill(0.0);
        for u in (0..cfg.unfolds).rev() {
            let s = &subs[t * cfg.unfolds + u];
            for j in 0..n {
                let dnum = dh[j] / s.den[j];
                let dden = -dh[j] * s.h_out[j] / s.den[j];
                let df = dnum * a[j] * dt + dden * dt;
                g_a[j] += dnum * s.f[j] * dt;
                // d(1/tau)/d(log_tau) = -1/tau
                g_lt[j] -= dden * dt * it[j];
                let fj = s.f[j];
                dz[j] = df * 2.0 * fj * (1.0 - fj);
                // direct path through the numerator
                dh[j] = dnum;
            }
            for j in 0..n {
                if dz[j] != 0.0 {
                    axpy(&mut g_rec[j * n..(j + 1) * n], dz[j], &s.h_in);
                    axpy(&mut dh, dz[j], &w_rec[j * n..(j + 1) * n]);
                }
                dp[j] += dz[j];
            }
        }
        let x = &xs[t];
        for j in 0..n {
            if dp[j] != 0.0 {
                axpy(&mut g_win[j * ni..(j + 1) * ni], dp[j], x);
                g_b[j] += dp[j];
            }
        }
    }
    Ok(readout)
}
