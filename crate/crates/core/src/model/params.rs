//! Plant parameter files (TOML). Built-in copies ship with the crate; any
//! field can be changed by loading an edited file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYNCHROTRON_TOML: &str = include_str!("../../params/synchrotron.toml");
const ROBOT_TOML: &str = include_str!("../../params/robot.toml");
const CSTR_TOML: &str = include_str!("../../params/cstr.toml");

/// Supported parameter file version.
pub const PARAMS_VERSION: u32 = 1;

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    #[derive(Deserialize)]
    struct Header {
        version: u32,
    }
    let header: Header = toml::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))?;
    if header.version != PARAMS_VERSION {
        return Err(Error::Config(format!(
            "{what}: unsupported parameter file version {}",
            header.version
        )));
    }
    toml::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SynchrotronParams {
    pub version: u32,
    pub name: String,
    pub sample_time: f64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub x_max: Vec<f64>,
    pub u_max: Vec<f64>,
}

impl SynchrotronParams {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = parse(text, "synchrotron parameters")?;
        let n = p.a.len();
        if p.a.iter().any(|r| r.len() != n) || p.b.len() != n || p.x_max.len() != n {
            return Err(Error::Config("synchrotron: A must be n×n, B and x_max n rows".into()));
        }
        let m = p.u_max.len();
        if p.b.iter().any(|r| r.len() != m) {
            return Err(Error::Config("synchrotron: B must have one column per input".into()));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }
}

impl Default for SynchrotronParams {
    fn default() -> Self {
        Self::from_toml(SYNCHROTRON_TOML).expect("built-in synchrotron parameters")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    pub version: u32,
    pub name: String,
    pub sample_time: f64,
    pub a1: f64,
    pub l1: f64,
    pub l2: f64,
    pub m_l1: f64,
    pub m_l2: f64,
    pub i_l1: f64,
    pub i_l2: f64,
    pub k_r1: f64,
    pub k_r2: f64,
    pub m_m2: f64,
    pub i_m1: f64,
    pub i_m2: f64,
    pub gravity: f64,
    pub velocity_max: f64,
    pub torque_max: f64,
    pub x_eq: Vec<f64>,
    pub u_eq: Vec<f64>,
}

/// Lumped coefficients of the arm's inertia, Coriolis and gravity terms:
/// `b11 = b11_0 + b11_c cos θ2`, `b12 = b12_0 + b12_c cos θ2`, `b22`,
/// Coriolis factor `−h sin θ2`, gravity `g1 cos θ1 + g12 cos(θ1+θ2)` and
/// `g12 cos(θ1+θ2)`.
#[derive(Debug, Clone, Copy)]
pub struct RobotCoefficients {
    pub b11_0: f64,
    pub b11_c: f64,
    pub b12_0: f64,
    pub b12_c: f64,
    pub b22: f64,
    pub h: f64,
    pub g1: f64,
    pub g12: f64,
}

impl RobotParams {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = parse(text, "robot parameters")?;
        if p.x_eq.len() != 4 || p.u_eq.len() != 2 {
            return Err(Error::Config("robot: x_eq needs 4 entries and u_eq 2".into()));
        }
        if !(p.sample_time > 0.0 && p.velocity_max > 0.0 && p.torque_max > 0.0) {
            return Err(Error::Config("robot: sample time and bounds must be positive".into()));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    pub fn coefficients(&self) -> RobotCoefficients {
        let a1 = self.a1;
        RobotCoefficients {
            b11_0: self.i_l1
                + self.m_l1 * self.l1 * self.l1
                + self.k_r1 * self.k_r1 * self.i_m1
                + self.i_l2
                + self.m_l2 * (a1 * a1 + self.l2 * self.l2)
                + self.i_m2
                + self.m_m2 * a1 * a1,
            b11_c: 2.0 * self.m_l2 * a1 * self.l2,
            b12_0: self.i_l2 + self.m_l2 * self.l2 * self.l2 + self.k_r2 * self.i_m2,
            b12_c: self.m_l2 * a1 * self.l2,
            b22: self.i_l2 + self.m_l2 * self.l2 * self.l2 + self.k_r2 * self.k_r2 * self.i_m2,
            h: self.m_l2 * a1 * self.l2,
            g1: (self.m_l1 * self.l1 + self.m_m2 * a1 + self.m_l2 * a1) * self.gravity,
            g12: self.m_l2 * self.l2 * self.gravity,
        }
    }
}

impl Default for RobotParams {
    fn default() -> Self {
        Self::from_toml(ROBOT_TOML).expect("built-in robot parameters")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CstrParams {
    pub version: u32,
    pub name: String,
    pub sample_time: f64,
    pub k10: f64,
    pub k20: f64,
    pub k30: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub dh_ab: f64,
    pub dh_bc: f64,
    pub dh_ad: f64,
    pub delta: f64,
    pub alpha: f64,
    pub c_in: f64,
    pub t_in: f64,
    pub t0: f64,
    pub state_scale: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub x_eq: Vec<f64>,
    pub u_eq: Vec<f64>,
}

impl CstrParams {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = parse(text, "cstr parameters")?;
        let three = [&p.state_scale, &p.x_min, &p.x_max, &p.x_eq];
        let two = [&p.input_scale, &p.u_min, &p.u_max, &p.u_eq];
        if three.iter().any(|v| v.len() != 3) || two.iter().any(|v| v.len() != 2) {
            return Err(Error::Config("cstr: state vectors need 3 entries, input vectors 2".into()));
        }
        if p.state_scale.iter().chain(p.input_scale.iter()).any(|s| *s <= 0.0) {
            return Err(Error::Config("cstr: scales must be positive".into()));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }
}

impl Default for CstrParams {
    fn default() -> Self {
        Self::from_toml(CSTR_TOML).expect("built-in cstr parameters")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_files_parse() {
        let _ = SynchrotronParams::default();
        let _ = CstrParams::default();
        let r = RobotParams::default();
        let c = r.coefficients();
        assert!((c.b11_0 - 200.01).abs() < 1e-12);
        assert!((c.b11_c - 50.0).abs() < 1e-12);
        assert!((c.b12_0 - 23.5).abs() < 1e-12);
        assert!((c.b22 - 122.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = ROBOT_TOML.replace("version = 1", "version = 7");
        assert!(matches!(RobotParams::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = format!("{CSTR_TOML}\nbogus = 1.0\n");
        assert!(CstrParams::from_toml(&text).is_err());
    }
}
