use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dynamics, SystemSpec, Units, GRAVITY};
use crate::{Error, Result};

pub const BUILTIN_NAMES: [&str; 9] = [
    "pendulum",
    "torricelli",
    "led",
    "sliding_block",
    "free_fall",
    "rover",
    "rotor",
    "lotka_volterra",
    "lorenz",
];

/// Named collection of systems. Starts from the built-ins; entries from a
/// TOML file replace or extend them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    #[serde(rename = "system", default)]
    systems: Vec<SystemSpec>,
}

pub fn registry_lookup(name: &str) -> Result<SystemSpec> {
    builtin(name).ok_or_else(|| Error::UnknownSystem(name.to_string()))
}

impl Registry {
    pub fn builtin() -> Self {
        Self {
            systems: BUILTIN_NAMES.iter().filter_map(|n| builtin(n)).collect(),
        }
    }

    pub fn lookup(&self, name: &str) -> Result<SystemSpec> {
        self.systems
            .iter()
            .find(|s| s.name == name)
            .cloned()
            .ok_or_else(|| Error::UnknownSystem(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.systems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn insert(&mut self, spec: SystemSpec) -> Result<()> {
        spec.validate()?;
        match self.systems.iter_mut().find(|s| s.name == spec.name) {
            Some(slot) => *slot = spec,
            None => self.systems.push(spec),
        }
        Ok(())
    }

    /// Built-ins overlaid with the systems declared in `text`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let extra: Registry = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut reg = Self::builtin();
        for spec in extra.systems {
            reg.insert(spec)?;
        }
        Ok(reg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn consts(xs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    xs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[allow(clippy::too_many_arguments)]
fn spec(
    name: &str,
    dynamics: Dynamics,
    states: &[&str],
    state_units: &[&str],
    params: &[(&str, f64, f64, f64, &str)],
    forcing_units: &[&str],
    mask: &[bool],
    constants: &[(&str, f64)],
) -> SystemSpec {
    SystemSpec {
        name: name.to_string(),
        dynamics,
        state_names: strings(states),
        param_names: params.iter().map(|p| p.0.to_string()).collect(),
        theta_nominal: params.iter().map(|p| p.1).collect(),
        lower_bounds: params.iter().map(|p| p.2).collect(),
        upper_bounds: params.iter().map(|p| p.3).collect(),
        forcing_dim: forcing_units.len(),
        measurement_mask: mask.to_vec(),
        units: Units {
            states: strings(state_units),
            params: params.iter().map(|p| p.4.to_string()).collect(),
            forcing: strings(forcing_units),
        },
        constants: consts(constants),
        calibrated_channels: Vec::new(),
        learned_initial: Vec::new(),
    }
}

fn builtin(name: &str) -> Option<SystemSpec> {
    let s = match name {
        "pendulum" => spec(
            name,
            Dynamics::Pendulum,
            &["angle", "omega"],
            &["rad", "rad/s"],
            &[("L", 0.90, 0.1, 2.0, "m"), ("tau", 0.05, 1e-3, 0.5, "1/s")],
            &[],
            &[true, false],
            &[("g", GRAVITY)],
        ),
        "torricelli" => spec(
            name,
            Dynamics::Torricelli,
            &["h"],
            &["m"],
            &[("k", 0.0128, 0.001, 0.1, "sqrt(m)/s")],
            &[],
            &[true],
            &[],
        ),
        "led" => spec(
            name,
            Dynamics::Led,
            &["intensity"],
            &["a.u."],
            &[("gamma", 0.92, 0.01, 5.0, "1/s")],
            &[],
            &[true],
            &[],
        ),
        "sliding_block" => spec(
            name,
            Dynamics::SlidingBlock,
            &["v"],
            &["m/s"],
            &[
                ("alpha", 25.0, 10.0, 45.0, "deg"),
                ("mu", 0.2, 0.1, 0.5, "1"),
            ],
            &[],
            &[true],
            &[("g", GRAVITY)],
        ),
        "free_fall" => spec(
            name,
            Dynamics::FreeFall,
            &["v"],
            &["m/s"],
            &[("g", 9.81, 1.0, 30.0, "m/s^2")],
            &[],
            &[true],
            &[("k_drag", 0.01)],
        ),
        "rover" => spec(
            name,
            Dynamics::Rover,
            &["p_x", "p_y", "heading", "v_x"],
            &["m", "m", "rad", "m/s"],
            &[
                ("a", 0.178, 0.05, 0.5, "m"),
                ("b", 0.144, 0.05, 0.5, "m"),
                ("r", 0.201, 0.05, 0.5, "m"),
                ("m", 26.88, 1.0, 100.0, "kg"),
                ("cm", 0.112, 0.01, 0.5, "m"),
            ],
            &["rad/s", "rad/s", "W"],
            &[true, true, false, false],
            &[
                ("wheelbase", 0.32),
                ("k_f", 0.15),
                ("c_d", 0.42),
                ("k_m", 1.0),
                ("g", GRAVITY),
            ],
        ),
        "rotor" => spec(
            name,
            Dynamics::Rotor,
            &["w", "w_dot"],
            &["rad/s", "rad/s^2"],
            &[
                ("k_th", 1.1, 0.1, 5.0, "N s^2/rad^2 (x1e-5)"),
                ("k_to", 1.3, 0.1, 5.0, "N m s^2/rad^2 (x1e-7)"),
                ("k_p", 0.91, 0.1, 5.0, "1"),
                ("tau2", 0.012, 1e-3, 0.1, "s"),
            ],
            &["1"],
            &[true, false],
            &[("zeta", 0.7)],
        ),
        "lotka_volterra" => spec(
            name,
            Dynamics::LotkaVolterra,
            &["prey", "predator"],
            &["1", "1"],
            &[
                ("alpha", 1.0, 0.01, 5.0, "1/s"),
                ("beta", 0.1, 0.001, 1.0, "1/s"),
                ("delta", 0.075, 0.001, 1.0, "1/s"),
                ("gamma", 1.5, 0.01, 5.0, "1/s"),
            ],
            &[],
            &[true, true],
            &[],
        ),
        "lorenz" => spec(
            name,
            Dynamics::Lorenz,
            &["x", "y", "z"],
            &["1", "1", "1"],
            &[
                ("sigma", 10.0, 1.0, 30.0, "1"),
                ("rho", 28.0, 1.0, 60.0, "1"),
                ("beta", 8.0 / 3.0, 0.5, 10.0, "1"),
            ],
            &[],
            &[true, true, true],
            &[],
        ),
        _ => return None,
    };
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates() {
        for name in BUILTIN_NAMES {
            let s = registry_lookup(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn shapes() {
        let p = registry_lookup("pendulum").unwrap();
        assert_eq!((p.state_dim(), p.param_count()), (2, 2));
        assert_eq!(p.param_names, vec!["L", "tau"]);
        assert_eq!(p.measurement_mask, vec![true, false]);
        let led = registry_lookup("led").unwrap();
        assert_eq!((led.state_dim(), led.param_count()), (1, 1));
        let lz = registry_lookup("lorenz").unwrap();
        assert_eq!((lz.state_dim(), lz.param_count()), (3, 3));
        let rover = registry_lookup("rover").unwrap();
        assert_eq!(rover.theta_nominal, vec![0.178, 0.144, 0.201, 26.88, 0.112]);
        let rotor = registry_lookup("rotor").unwrap();
        assert_eq!(rotor.theta_nominal, vec![1.1, 1.3, 0.91, 0.012]);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            registry_lookup("quadrotor6dof"),
            Err(Error::UnknownSystem(_))
        ));
    }

    #[test]
    fn toml_round_trip_and_user_systems() {
        let reg = Registry::builtin();
        let text = reg.to_toml_string().unwrap();
        let back = Registry::from_toml_str(&text).unwrap();
        assert_eq!(back, reg);

        let user = r#"
            [[system]]
            name = "long_pendulum"
            dynamics = "pendulum"
            state_names = ["angle", "omega"]
            param_names = ["L", "tau"]
            theta_nominal = [1.5, 0.05]
            lower_bounds = [0.1, 0.001]
            upper_bounds = [2.0, 0.5]
            measurement_mask = [true, false]
            constants = { g = 9.81 }
        "#;
        let reg = Registry::from_toml_str(user).unwrap();
        assert_eq!(reg.lookup("long_pendulum").unwrap().theta_nominal[0], 1.5);
        assert!(reg.lookup("pendulum").is_ok());
    }

    #[test]
    fn invalid_bounds_rejected() {
        let mut s = registry_lookup("led").unwrap();
        s.theta_nominal = vec![6.0];
        assert!(s.validate().is_err());
        let mut s = registry_lookup("led").unwrap();
        s.measurement_mask = vec![false];
        assert!(s.validate().is_err());
    }
}
