use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Noise levels of the constant-velocity tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    /// White-acceleration spectral density (px^2/s^3).
    pub q: f64,
    /// Measurement variance (px^2).
    pub r: f64,
    /// Initial velocity variance (px^2/s^2).
    pub velocity_var: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            q: 1e-2,
            r: 1.0,
            velocity_var: 1e4,
        }
    }
}

/// Forward Kalman filter over a pixel track with state `[x, y, vx, vy]`;
/// returns the filtered positions.
pub fn kalman_smooth(xy: &[[f64; 2]], dt: f64, p: KalmanParams) -> Result<Vec<[f64; 2]>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(p.q >= 0.0 && p.r >= 0.0 && p.velocity_var > 0.0) {
        return Err(Error::InvalidArgument(
            "noise levels must be non-negative".into(),
        ));
    }
    let Some(first) = xy.first() else {
        return Ok(Vec::new());
    };
    #[rustfmt::skip]
    let f = Matrix4::new(
        1.0, 0.0, dt, 0.0,
        0.0, 1.0, 0.0, dt,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    );
    let (a, b, c) = (dt * dt * dt / 3.0, dt * dt / 2.0, dt);
    #[rustfmt::skip]
    let q = Matrix4::new(
        a, 0.0, b, 0.0,
        0.0, a, 0.0, b,
        b, 0.0, c, 0.0,
        0.0, b, 0.0, c,
    ) * p.q;
    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let r = Matrix2::identity() * p.r;

    let mut x = Vector4::new(first[0], first[1], 0.0, 0.0);
    let mut cov = Matrix4::from_diagonal(&Vector4::new(p.r, p.r, p.velocity_var, p.velocity_var));
    let mut out = Vec::with_capacity(xy.len());
    out.push(*first);
    for z in &xy[1..] {
        x = f * x;
        cov = f * cov * f.transpose() + q;
        let s = h * cov * h.transpose() + r;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular innovation covariance".into()))?;
        let k = cov * h.transpose() * s_inv;
        let innov = Vector2::new(z[0], z[1]) - h * x;
        x += k * innov;
        // Joseph-form covariance update
        let i_kh = Matrix4::identity() - k * h;
        cov = i_kh * cov * i_kh.transpose() + k * r * k.transpose();
        out.push([x[0], x[1]]);
    }
    Ok(out)
}

/// `atan2(y - y_p, x - x_p)` for every point, in radians.
pub fn pixel_to_angle(xy: &[[f64; 2]], pivot: [f64; 2]) -> Result<Vec<f64>> {
    xy.iter()
        .enumerate()
        .map(|(i, p)| {
            let (dx, dy) = (p[0] - pivot[0], p[1] - pivot[1]);
            if dx == 0.0 && dy == 0.0 {
                Err(Error::AtPivot(i))
            } else {
                Ok(dy.atan2(dx))
            }
        })
        .collect()
}

/// Scales pixel coordinates to metres about an origin.
pub fn pixels_to_meters(xy: &[[f64; 2]], origin: [f64; 2], meters_per_pixel: f64) -> Vec<[f64; 2]> {
    xy.iter()
        .map(|p| {
            [
                (p[0] - origin[0]) * meters_per_pixel,
                (p[1] - origin[1]) * meters_per_pixel,
            ]
        })
        .collect()
}

/// Causal moving average with weights `1..=m`, newest sample heaviest. The
/// first `window - 1` outputs use the samples available so far.
pub fn weighted_moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    Ok((0..series.len())
        .map(|i| {
            let m = window.min(i + 1);
            let start = i + 1 - m;
            let mut num = 0.0;
            let mut den = 0.0;
            for (j, v) in series[start..=i].iter().enumerate() {
                let w = (j + 1) as f64;
                num += w * v;
                den += w;
            }
            num / den
        })
        .collect())
}
