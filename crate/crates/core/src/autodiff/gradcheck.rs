use super::{Real, Tape};
use crate::Result;

/// A scalar function that can be evaluated both on plain floats and on a tape.
pub trait ScalarFn {
    fn eval<R: Real>(&self, x: &[R]) -> Result<R>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub coords: Vec<CoordCheck>,
    pub max_rel_error: f64,
    /// Set when the tape hit a non-differentiable point at `x`; such
    /// evaluations are not compared.
    pub excluded: bool,
}

impl GradCheckReport {
    pub fn failures(&self, tol: f64) -> Vec<&CoordCheck> {
        self.coords.iter().filter(|c| c.rel_error >= tol).collect()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Tape gradient of `f` at `x`.
pub fn gradient<F: ScalarFn>(f: &F, x: &[f64]) -> Result<(f64, Vec<f64>, usize)> {
    let tape = Tape::new();
    let vars = tape.vars(x);
    let out = f.eval(&vars)?;
    let grads = tape.backward(out);
    Ok((out.value(), grads.wrt_all(&vars), tape.kink_count()))
}

/// Central-difference stencil width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`
    #[default]
    ThreePoint,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`
    FivePoint,
}

/// Central-difference gradient of `f` at `x` evaluated in plain f64.
pub fn numeric_gradient<F: ScalarFn>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>> {
    numeric_gradient_with(f, x, h, Stencil::ThreePoint)
}

pub fn numeric_gradient_with<F: ScalarFn>(
    f: &F,
    x: &[f64],
    h: f64,
    stencil: Stencil,
) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    let at = |probe: &mut Vec<f64>, i: usize, orig: f64, step: f64| -> Result<f64> {
        probe[i] = orig + step;
        let v = f.eval(probe.as_slice());
        probe[i] = orig;
        v
    };
    for i in 0..x.len() {
        let orig = probe[i];
        let d = match stencil {
            Stencil::ThreePoint => {
                (at(&mut probe, i, orig, h)? - at(&mut probe, i, orig, -h)?) / (2.0 * h)
            }
            Stencil::FivePoint => {
                let (p1, m1) = (at(&mut probe, i, orig, h)?, at(&mut probe, i, orig, -h)?);
                let (p2, m2) = (
                    at(&mut probe, i, orig, 2.0 * h)?,
                    at(&mut probe, i, orig, -2.0 * h)?,
                );
                (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
            }
        };
        out.push(d);
    }
    Ok(out)
}

/// Compares the tape gradient against central differences with step `h`.
pub fn grad_check<F: ScalarFn>(f: &F, x: &[f64], h: f64) -> Result<GradCheckReport> {
    grad_check_with(f, x, h, Stencil::ThreePoint)
}

pub fn grad_check_with<F: ScalarFn>(
    f: &F,
    x: &[f64],
    h: f64,
    stencil: Stencil,
) -> Result<GradCheckReport> {
    let (_, analytic, kinks) = gradient(f, x)?;
    if kinks > 0 {
        return Ok(GradCheckReport {
            coords: Vec::new(),
            max_rel_error: 0.0,
            excluded: true,
        });
    }
    let numeric = numeric_gradient_with(f, x, h, stencil)?;
    let coords: Vec<CoordCheck> = analytic
        .iter()
        .zip(&numeric)
        .enumerate()
        .map(|(index, (&a, &n))| CoordCheck {
            index,
            analytic: a,
            numeric: n,
            rel_error: relative_error(a, n),
        })
        .collect();
    let max_rel_error = coords.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        coords,
        max_rel_error,
        excluded: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl ScalarFn for Quadratic {
        fn eval<R: Real>(&self, x: &[R]) -> Result<R> {
            // x^T A x with A = [[2, 0.5], [0.5, 1]] plus a linear term
            Ok(x[0] * x[0] * 2.0 + x[0] * x[1] + x[1] * x[1] + x[1] * 3.0)
        }
    }

    struct SinSquare;

    impl ScalarFn for SinSquare {
        fn eval<R: Real>(&self, x: &[R]) -> Result<R> {
            Ok((x[0] * x[0]).sin())
        }
    }

    struct Relu;

    impl ScalarFn for Relu {
        fn eval<R: Real>(&self, x: &[R]) -> Result<R> {
            Ok(x[0].relu())
        }
    }

    #[test]
    fn quadratic_form_is_exact_to_fd_precision() {
        let rep = grad_check(&Quadratic, &[0.7, -1.3], 1e-5).unwrap();
        assert!(rep.max_rel_error < 1e-7, "{rep:?}");
    }

    #[test]
    fn sin_of_square() {
        let (_, g, _) = gradient(&SinSquare, &[1.0]).unwrap();
        let fd = numeric_gradient(&SinSquare, &[1.0], 1e-6).unwrap();
        assert!((g[0] - 2.0 * 1f64.cos()).abs() < 1e-12);
        assert!((g[0] - fd[0]).abs() < 1e-8);
        assert!((g[0] - 1.0806).abs() < 1e-4);
    }

    #[test]
    fn relu_kink_is_excluded() {
        let rep = grad_check(&Relu, &[0.0], 1e-6).unwrap();
        assert!(rep.excluded);
        let rep = grad_check(&Relu, &[0.3], 1e-6).unwrap();
        assert!(!rep.excluded && rep.max_rel_error < 1e-9);
    }

    #[test]
    fn five_point_is_fourth_order() {
        let exact = 2.0 * 1f64.cos();
        let e1 = (numeric_gradient_with(&SinSquare, &[1.0], 1e-2, Stencil::FivePoint).unwrap()[0]
            - exact)
            .abs();
        let e2 = (numeric_gradient_with(&SinSquare, &[1.0], 5e-3, Stencil::FivePoint).unwrap()[0]
            - exact)
            .abs();
        assert!((e1 / e2).log2() > 3.7, "{e1} {e2}");
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
    }
}
