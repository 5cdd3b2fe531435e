use super::{Dynamics, SystemSpec};
use crate::autodiff::Real;
use crate::Result;

/// Width of the tanh used in place of sign(v).
const SIGN_WIDTH: f64 = 0.01;

/// Differentiable stand-in for sign(v).
pub fn smooth_sign<R: Real>(v: R) -> R {
    (v / SIGN_WIDTH).tanh()
}

/// Net downhill acceleration of a block on an incline, `g (sin a - mu cos a)`,
/// with the incline given in degrees.
pub fn sliding_block_acceleration<R: Real>(alpha_deg: R, mu: R, g: f64) -> R {
    let a = alpha_deg * (std::f64::consts::PI / 180.0);
    (a.sin() - mu * a.cos()) * g
}

/// Thrust and reaction torque of a rotor spinning at `w`.
pub fn rotor_thrust_torque<R: Real>(w: R, k_thrust: R, k_torque: R) -> (R, R) {
    let w2 = w * w;
    (k_thrust * w2, k_torque * w2)
}

pub(super) fn rhs<R: Real>(
    spec: &SystemSpec,
    x: &[R],
    u: &[f64],
    theta: &[R],
    _t: f64,
) -> Result<Vec<R>> {
    Ok(match spec.dynamics {
        Dynamics::Pendulum => {
            // theta: [L, tau]
            let g = spec.constant("g")?;
            let (angle, omega) = (x[0], x[1]);
            let (len, damping) = (theta[0], theta[1]);
            let accel = -(angle.sin() * g + damping * omega) / len;
            vec![omega, accel]
        }
        Dynamics::Torricelli => {
            // empty tank is absorbing: sqrt of the clamped level, zero slope at 0
            vec![-(theta[0] * x[0].sqrt_clamped())]
        }
        Dynamics::Led => vec![-(theta[0] * x[0])],
        Dynamics::SlidingBlock => {
            let g = spec.constant("g")?;
            vec![sliding_block_acceleration(theta[0], theta[1], g)]
        }
        Dynamics::FreeFall => {
            let k = spec.constant("k_drag")?;
            let v = x[0];
            vec![theta[0] - v * v * smooth_sign(v) * k]
        }
        Dynamics::Rover => {
            // states: [p_x, p_y, heading, v_x]; forcing: [omega_r, omega_l, u_power]
            // theta: [a, b, r, m, cm]; only r and m enter the planar model
            let wheelbase = spec.constant("wheelbase")?;
            let k_f = spec.constant("k_f")?;
            let c_d = spec.constant("c_d")?;
            let k_m = spec.constant("k_m")?;
            let g = spec.constant("g")?;
            let (heading, v) = (x[2], x[3]);
            let (r, m) = (theta[2], theta[3]);
            let (omega_r, omega_l, power) = (u[0], u[1], u[2]);
            let s = smooth_sign(v);
            let f_motor = R::cst(k_m * power) / r;
            let f_friction = m * (k_f * g) * s;
            let f_drag = v * v * s * c_d;
            vec![
                v * heading.cos(),
                v * heading.sin(),
                r * ((omega_r - omega_l) / wheelbase),
                (f_motor - f_friction - f_drag) / m,
            ]
        }
        Dynamics::Rotor => {
            // tau^2 w'' + 2 zeta tau w' + w = k_p u, as two first-order states
            let zeta = spec.constant("zeta")?;
            let (w, w_dot) = (x[0], x[1]);
            let (k_p, tau) = (theta[2], theta[3]);
            let w_ddot = (k_p * u[0] - w - tau * w_dot * (2.0 * zeta)) / (tau * tau);
            vec![w_dot, w_ddot]
        }
        Dynamics::LotkaVolterra => {
            let (prey, pred) = (x[0], x[1]);
            let (alpha, beta, delta, gamma) = (theta[0], theta[1], theta[2], theta[3]);
            vec![
                alpha * prey - beta * prey * pred,
                delta * prey * pred - gamma * pred,
            ]
        }
        Dynamics::Lorenz => {
            let (sigma, rho, beta) = (theta[0], theta[1], theta[2]);
            vec![
                sigma * (x[1] - x[0]),
                x[0] * (rho - x[2]) - x[1],
                x[0] * x[1] - beta * x[2],
            ]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::registry_lookup;
    use std::f64::consts::PI;

    fn eval(name: &str, x: &[f64], u: &[f64], theta: &[f64]) -> Vec<f64> {
        registry_lookup(name)
            .unwrap()
            .rhs(x, u, theta, 0.0)
            .unwrap()
    }

    #[test]
    fn pendulum_equilibrium_and_horizontal() {
        assert_eq!(
            eval("pendulum", &[0.0, 0.0], &[], &[1.0, 0.05]),
            vec![0.0, 0.0]
        );
        let d = eval("pendulum", &[PI / 2.0, 0.0], &[], &[1.0, 0.0]);
        assert_eq!(d[0], 0.0);
        assert!((d[1] + 9.81).abs() < 1e-12);
    }

    #[test]
    fn led_and_torricelli() {
        assert_eq!(eval("led", &[0.5], &[], &[2.0]), vec![-1.0]);
        let d = eval("torricelli", &[0.04], &[], &[0.01]);
        assert!((d[0] + 0.002).abs() < 1e-15);
        assert_eq!(eval("torricelli", &[0.0], &[], &[0.01]), vec![0.0]);
        assert_eq!(eval("torricelli", &[-1e-3], &[], &[0.01]), vec![0.0]);
    }

    #[test]
    fn sliding_block_thirty_degrees() {
        let d = eval("sliding_block", &[0.0], &[], &[30.0, 0.2]);
        assert!((d[0] - 3.2058).abs() < 5e-4, "{}", d[0]);
    }

    #[test]
    fn free_fall_terminal_velocity() {
        let spec = registry_lookup("free_fall").unwrap();
        let k = spec.constant("k_drag").unwrap();
        let v_term = (9.8f64 / k).sqrt();
        let d = spec.rhs(&[v_term], &[], &[9.8], 0.0).unwrap();
        assert!(d[0].abs() < 1e-9);
        assert_eq!(spec.rhs(&[0.0], &[], &[9.8], 0.0).unwrap(), vec![9.8]);
    }

    #[test]
    fn rover_straight_line() {
        let spec = registry_lookup("rover").unwrap();
        let theta = [0.178, 0.144, 0.2, 26.88, 0.112];
        let d = spec
            .rhs(&[0.0, 0.0, 0.0, 2.0], &[10.0, 10.0, 0.0], &theta, 0.0)
            .unwrap();
        // kinematic speed r*(w_r + w_l)/2 = 2.0, no turning
        assert_eq!(0.2 * (10.0 + 10.0) / 2.0, 2.0);
        assert_eq!(d[2], 0.0);
        assert!((d[0] - 2.0).abs() < 1e-12);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn rotor_steady_state() {
        let spec = registry_lookup("rotor").unwrap();
        let theta = [1.1, 1.3, 0.91, 0.012];
        let u = 3.0;
        let d = spec.rhs(&[0.91 * u, 0.0], &[u], &theta, 0.0).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
        let (thrust, torque) = rotor_thrust_torque(2.0, 1.1, 1.3);
        assert!((thrust - 4.4).abs() < 1e-12 && (torque - 5.2).abs() < 1e-12);
    }

    #[test]
    fn lotka_volterra_and_lorenz_fixed_points() {
        let (a, b, d, g) = (1.0, 0.1, 0.075, 1.5);
        let fp = [g / d, a / b];
        let r = eval("lotka_volterra", &fp, &[], &[a, b, d, g]);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        let r = eval("lorenz", &[0.0, 0.0, 0.0], &[], &[10.0, 28.0, 8.0 / 3.0]);
        assert_eq!(r, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let spec = registry_lookup("pendulum").unwrap();
        assert!(spec.rhs(&[0.0], &[], &[1.0, 0.1], 0.0).is_err());
        assert!(spec.rhs(&[0.0, 0.0], &[1.0], &[1.0, 0.1], 0.0).is_err());
    }
}
