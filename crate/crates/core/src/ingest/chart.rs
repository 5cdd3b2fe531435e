use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::align::interp;
use crate::{Error, Result};

pub const DEFAULT_COLOR_TOLERANCE: f64 = 60.0;

/// Two reference points per axis: pixel coordinate and the data value there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisCalibration {
    pub x_px: [f64; 2],
    pub x_val: [f64; 2],
    pub y_px: [f64; 2],
    pub y_val: [f64; 2],
}

impl AxisCalibration {
    /// Maps the data box `[t0, t1] x [y0, y1]` onto the pixel box
    /// `[left, right] x [bottom, top]` (rows grow downward).
    pub fn from_box(px: [f64; 4], data: [f64; 4]) -> Self {
        let [left, right, top, bottom] = px;
        let [t0, t1, y0, y1] = data;
        Self {
            x_px: [left, right],
            x_val: [t0, t1],
            y_px: [bottom, top],
            y_val: [y0, y1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .x_px
            .iter()
            .chain(&self.x_val)
            .chain(&self.y_px)
            .chain(&self.y_val)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::DegenerateCalibration(
                "non-finite reference value".into(),
            ));
        }
        if self.x_px[0] == self.x_px[1] || self.y_px[0] == self.y_px[1] {
            return Err(Error::DegenerateCalibration(
                "coincident pixel reference points".into(),
            ));
        }
        if self.x_val[0] == self.x_val[1] || self.y_val[0] == self.y_val[1] {
            return Err(Error::DegenerateCalibration(
                "coincident data reference values".into(),
            ));
        }
        if (self.x_val[1] - self.x_val[0]) / (self.x_px[1] - self.x_px[0]) < 0.0 {
            return Err(Error::DegenerateCalibration(
                "time axis must increase with pixel column".into(),
            ));
        }
        Ok(())
    }

    pub fn t_of(&self, col: f64) -> f64 {
        affine(col, self.x_px, self.x_val)
    }

    pub fn y_of(&self, row: f64) -> f64 {
        affine(row, self.y_px, self.y_val)
    }

    pub fn col_of(&self, t: f64) -> f64 {
        affine(t, self.x_val, self.x_px)
    }

    pub fn row_of(&self, y: f64) -> f64 {
        affine(y, self.y_val, self.y_px)
    }
}

fn affine(v: f64, from: [f64; 2], to: [f64; 2]) -> f64 {
    to[0] + (v - from[0]) * (to[1] - to[0]) / (from[1] - from[0])
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    Ok(image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(format!("{}: {other}", path.display())),
        })?
        .to_rgb8())
}

pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image(format!("{}: {other}", path.display())),
    })
}

fn color_distance(a: &Rgb<u8>, b: [u8; 3]) -> f64 {
    a.0.iter()
        .zip(b)
        .map(|(&x, y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Extracts one `(t, y)` point per pixel column containing the curve color:
/// the mean row of matching pixels, mapped through the axis calibration.
pub fn digitize_chart(
    img: &RgbImage,
    color: [u8; 3],
    tolerance: f64,
    calib: &AxisCalibration,
) -> Result<Vec<(f64, f64)>> {
    calib.validate()?;
    let mut out = Vec::new();
    for x in 0..img.width() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in 0..img.height() {
            if color_distance(img.get_pixel(x, y), color) <= tolerance {
                sum += y as f64;
                n += 1;
            }
        }
        if n > 0 {
            out.push((calib.t_of(x as f64), calib.y_of(sum / n as f64)));
        }
    }
    if out.is_empty() {
        return Err(Error::NoCurve(color));
    }
    Ok(out)
}

/// One polyline to draw with [`render_chart`].
#[derive(Debug, Clone)]
pub struct Curve<'a> {
    pub t: &'a [f64],
    pub y: &'a [f64],
    pub color: [u8; 3],
}

/// Draws curves on a white canvas with a square pen of `thickness` pixels.
pub fn render_chart(
    width: u32,
    height: u32,
    calib: &AxisCalibration,
    curves: &[Curve],
    thickness: u32,
) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let half = thickness as f64 / 2.0;
    for c in curves {
        let pts: Vec<(f64, f64)> =
            c.t.iter()
                .zip(c.y)
                .map(|(&t, &y)| (calib.col_of(t), calib.row_of(y)))
                .collect();
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            let steps = (len * 4.0).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let f = s as f64 / steps as f64;
                let (px, py) = (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
                let x0 = (px - half + 0.5).round().max(0.0) as i64;
                let y0 = (py - half + 0.5).round().max(0.0) as i64;
                for xi in x0..x0 + thickness as i64 {
                    for yi in y0..y0 + thickness as i64 {
                        if xi < width as i64 && yi < height as i64 {
                            img.put_pixel(xi as u32, yi as u32, Rgb(c.color));
                        }
                    }
                }
            }
        }
    }
    img
}

/// Resamples digitized curves onto `k / fps` inside their common span.
pub fn resample_digitized(
    curves: &[Vec<(f64, f64)>],
    fps: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if !(fps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fps must be positive, got {fps}"
        )));
    }
    if curves.is_empty() || curves.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("no digitized points".into()));
    }
    let start = curves
        .iter()
        .map(|d| d[0].0)
        .fold(f64::NEG_INFINITY, f64::max);
    let end = curves
        .iter()
        .map(|d| d[d.len() - 1].0)
        .fold(f64::INFINITY, f64::min);
    let first = (start * fps - 1e-9).ceil() as i64;
    let last = (end * fps + 1e-9).floor() as i64;
    if last < first {
        return Err(Error::Alignment(
            "digitized curves do not overlap in time".into(),
        ));
    }
    let grid: Vec<f64> = (first..=last).map(|k| k as f64 / fps).collect();
    let values = curves
        .iter()
        .map(|d| {
            let (t, y): (Vec<f64>, Vec<f64>) = d.iter().copied().unzip();
            grid.iter().map(|&g| interp(&t, &y, g)).collect()
        })
        .collect();
    Ok((grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calib() -> AxisCalibration {
        AxisCalibration::from_box([50.0, 750.0, 50.0, 550.0], [0.0, 10.0, -1.5, 1.5])
    }

    #[test]
    fn flat_line() {
        let c = calib();
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let y = vec![0.4; t.len()];
        let img = render_chart(
            800,
            600,
            &c,
            &[Curve {
                t: &t,
                y: &y,
                color: [0, 0, 255],
            }],
            2,
        );
        let pts = digitize_chart(&img, [0, 0, 255], DEFAULT_COLOR_TOLERANCE, &c).unwrap();
        let half_px = 3.0 / 500.0 / 2.0;
        assert!(pts.iter().all(|p| (p.1 - 0.4).abs() <= half_px));
    }

    #[test]
    fn sine_round_trip() {
        let c = calib();
        let t: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.005).collect();
        let y: Vec<f64> = t.iter().map(|t| (1.3 * t).sin()).collect();
        let img = render_chart(
            800,
            600,
            &c,
            &[Curve {
                t: &t,
                y: &y,
                color: [220, 30, 30],
            }],
            2,
        );
        let pts = digitize_chart(&img, [220, 30, 30], DEFAULT_COLOR_TOLERANCE, &c).unwrap();
        assert!(pts.windows(2).all(|w| w[1].0 > w[0].0));
        let rmse = (pts
            .iter()
            .map(|(t, y)| (y - (1.3 * t).sin()).powi(2))
            .sum::<f64>()
            / pts.len() as f64)
            .sqrt();
        assert!(rmse < 0.02 * 2.0, "{rmse}");
    }

    #[test]
    fn errors() {
        let c = calib();
        let img = RgbImage::from_pixel(20, 20, Rgb([255, 255, 255]));
        assert!(matches!(
            digitize_chart(&img, [0, 0, 0], 60.0, &c),
            Err(Error::NoCurve([0, 0, 0]))
        ));
        let mut bad = c;
        bad.x_px = [10.0, 10.0];
        assert!(matches!(
            bad.validate(),
            Err(Error::DegenerateCalibration(_))
        ));
        let mut swapped = c;
        swapped.x_val = [10.0, 0.0];
        assert!(matches!(
            swapped.validate(),
            Err(Error::DegenerateCalibration(_))
        ));
    }
}
