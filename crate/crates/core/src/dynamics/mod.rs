//! Parametric ODE systems: right-hand sides, parameter metadata and
//! measurement masks.

mod forcing;
mod registry;
mod systems;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use forcing::ForcingSignal;
pub use registry::{registry_lookup, Registry, BUILTIN_NAMES};
pub use systems::{rotor_thrust_torque, sliding_block_acceleration, smooth_sign};

use crate::autodiff::Real;
use crate::{Error, Result};

/// Lower limit applied to every parameter before simulation.
pub const SOFT_CLAMP_EPS: f64 = 1e-4;

/// Gravitational acceleration used where g is a fixed constant.
pub const GRAVITY: f64 = 9.81;

/// Which right-hand side a [`SystemSpec`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Pendulum,
    Torricelli,
    Led,
    SlidingBlock,
    FreeFall,
    Rover,
    Rotor,
    LotkaVolterra,
    Lorenz,
}

impl Dynamics {
    pub fn state_dim(self) -> usize {
        match self {
            Dynamics::Torricelli | Dynamics::Led | Dynamics::SlidingBlock | Dynamics::FreeFall => 1,
            Dynamics::Pendulum | Dynamics::Rotor | Dynamics::LotkaVolterra => 2,
            Dynamics::Lorenz => 3,
            Dynamics::Rover => 4,
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            Dynamics::Torricelli | Dynamics::Led | Dynamics::FreeFall => 1,
            Dynamics::Pendulum | Dynamics::SlidingBlock => 2,
            Dynamics::Lorenz => 3,
            Dynamics::Rotor | Dynamics::LotkaVolterra => 4,
            Dynamics::Rover => 5,
        }
    }

    /// Whether every state is a non-negative quantity (a level or a count).
    pub fn nonnegative_states(self) -> bool {
        matches!(self, Dynamics::Torricelli | Dynamics::LotkaVolterra)
    }

    pub fn forcing_dim(self) -> usize {
        match self {
            Dynamics::Rover => 3,
            Dynamics::Rotor => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Units {
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default)]
    pub forcing: Vec<String>,
}

/// A parametric ODE `dx/dt = f(x, u, theta, t)` plus what is known about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub name: String,
    pub dynamics: Dynamics,
    pub state_names: Vec<String>,
    pub param_names: Vec<String>,
    pub theta_nominal: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    #[serde(default)]
    pub forcing_dim: usize,
    /// Diagonal of the measurement matrix.
    pub measurement_mask: Vec<bool>,
    #[serde(default)]
    pub units: Units,
    /// Fixed, known physical constants used by the right-hand side.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    /// Channels whose trajectory loss gets a learned constant offset.
    #[serde(default)]
    pub calibrated_channels: Vec<bool>,
    /// Unmeasured states whose initial value is learned instead of set to 0.
    #[serde(default)]
    pub learned_initial: Vec<bool>,
}

impl SystemSpec {
    pub fn state_dim(&self) -> usize {
        self.state_names.len()
    }

    pub fn param_count(&self) -> usize {
        self.param_names.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|p| p == name)
    }

    pub fn constant(&self, key: &str) -> Result<f64> {
        self.constants
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidSpec {
                name: self.name.clone(),
                reason: format!("missing constant '{key}'"),
            })
    }

    /// Whether channel `i` carries a learned offset.
    pub fn is_calibrated(&self, i: usize) -> bool {
        self.calibrated_channels.get(i).copied().unwrap_or(false)
    }

    /// Whether the initial value of unmeasured state `i` is learned.
    pub fn has_learned_initial(&self, i: usize) -> bool {
        !self.measurement_mask[i] && self.learned_initial.get(i).copied().unwrap_or(false)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidSpec {
            name: self.name.clone(),
            reason,
        };
        let d = self.state_dim();
        let k = self.param_count();
        if d != self.dynamics.state_dim() {
            return Err(bad(format!(
                "{:?} has {} states, spec lists {d}",
                self.dynamics,
                self.dynamics.state_dim()
            )));
        }
        if k != self.dynamics.param_count() {
            return Err(bad(format!(
                "{:?} has {} parameters, spec lists {k}",
                self.dynamics,
                self.dynamics.param_count()
            )));
        }
        if self.forcing_dim != self.dynamics.forcing_dim() {
            return Err(bad(format!(
                "forcing_dim must be {}",
                self.dynamics.forcing_dim()
            )));
        }
        for (what, len) in [
            ("theta_nominal", self.theta_nominal.len()),
            ("lower_bounds", self.lower_bounds.len()),
            ("upper_bounds", self.upper_bounds.len()),
        ] {
            if len != k {
                return Err(bad(format!("{what} has {len} entries, expected {k}")));
            }
        }
        if self.measurement_mask.len() != d {
            return Err(bad(format!("measurement_mask must have {d} entries")));
        }
        if !self.measurement_mask.iter().any(|&m| m) {
            return Err(bad("at least one state must be measured".into()));
        }
        for (what, v) in [
            ("calibrated_channels", &self.calibrated_channels),
            ("learned_initial", &self.learned_initial),
        ] {
            if !v.is_empty() && v.len() != d {
                return Err(bad(format!("{what} must be empty or have {d} entries")));
            }
        }
        for i in 0..k {
            let (l, n, u) = (
                self.lower_bounds[i],
                self.theta_nominal[i],
                self.upper_bounds[i],
            );
            if !(0.0 < l && l < n && n < u) {
                return Err(bad(format!(
                    "parameter '{}' needs 0 < lower < nominal < upper, got {l}, {n}, {u}",
                    self.param_names[i]
                )));
            }
        }
        let needed: &[&str] = match self.dynamics {
            Dynamics::Pendulum | Dynamics::SlidingBlock => &["g"],
            Dynamics::FreeFall => &["k_drag"],
            Dynamics::Rover => &["wheelbase", "k_f", "c_d", "k_m", "g"],
            Dynamics::Rotor => &["zeta"],
            _ => &[],
        };
        for key in needed {
            self.constant(key)?;
        }
        Ok(())
    }

    /// Evaluates dx/dt. `theta` is used as given; callers soft-clamp first.
    pub fn rhs<R: Real>(&self, x: &[R], u: &[f64], theta: &[R], t: f64) -> Result<Vec<R>> {
        if x.len() != self.state_dim() {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        if theta.len() != self.param_count() {
            return Err(Error::Dimension {
                what: "parameters",
                expected: self.param_count(),
                got: theta.len(),
            });
        }
        if u.len() != self.forcing_dim {
            return Err(Error::Dimension {
                what: "forcing",
                expected: self.forcing_dim,
                got: u.len(),
            });
        }
        systems::rhs(self, x, u, theta, t)
    }

    /// Projects a state back onto the physically admissible set after an
    /// integration step (only the draining tank needs this: h >= 0).
    pub fn project<R: Real>(&self, x: &mut [R]) {
        if self.dynamics == Dynamics::Torricelli {
            x[0] = x[0].relu();
        }
    }

    /// Same system with different nominal parameters.
    pub fn with_nominal(&self, nominal: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.theta_nominal = nominal.to_vec();
        s.validate()?;
        Ok(s)
    }
}

/// `theta_i <- max(eps, theta_i)`.
pub fn soft_clamp<R: Real>(theta: &[R]) -> Vec<R> {
    theta.iter().map(|&v| v.max_c(SOFT_CLAMP_EPS)).collect()
}

/// Named physical parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(spec: &SystemSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::Dimension {
                what: "parameters",
                expected: spec.param_count(),
                got: values.len(),
            });
        }
        Ok(Self {
            names: spec.param_names.clone(),
            values,
        })
    }

    pub fn nominal(spec: &SystemSpec) -> Self {
        Self {
            names: spec.param_names.clone(),
            values: spec.theta_nominal.clone(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn soft_clamped(&self) -> Self {
        Self {
            names: self.names.clone(),
            values: soft_clamp(&self.values),
        }
    }
}
