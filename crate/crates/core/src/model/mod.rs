//! Discrete-time plant models `x⁺ = f(x, u)` with box constraints.

mod dynamics;
pub mod params;
pub mod plants;
mod sampling;
mod transform;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use dynamics::{ContinuousPlant, Dynamics};
pub use sampling::{sample_initial_conditions, InitialConditionSet};
pub use transform::InputTransform;

/// States larger than this (scaled units) abort integration.
pub const BLOW_UP_LIMIT: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub name: String,
    pub dynamics: Dynamics,
    pub x_lo: DVector<f64>,
    pub x_hi: DVector<f64>,
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
    pub x_eq: DVector<f64>,
    pub u_eq: DVector<f64>,
    /// Plant time units per step.
    pub sample_time: f64,
    /// Scaled value = physical value × scale.
    pub state_scale: DVector<f64>,
    pub input_scale: DVector<f64>,
}

impl DiscreteModel {
    pub fn nx(&self) -> usize {
        self.x_eq.len()
    }

    pub fn nu(&self) -> usize {
        self.u_eq.len()
    }

    fn check_dims(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        if x.len() != self.nx() || u.len() != self.nu() {
            return Err(Error::Dimension(format!(
                "{}: expected x in R^{} and u in R^{}, got {} and {}",
                self.name,
                self.nx(),
                self.nu(),
                x.len(),
                u.len()
            )));
        }
        Ok(())
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(x, u)?;
        let next = self.dynamics.step(x, u);
        guard(next, x, u, 0)
    }

    /// Next state with `∂x⁺/∂x` and `∂x⁺/∂u`.
    pub fn step_with_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        self.check_dims(x, u)?;
        let (next, a, b) = self.dynamics.step_with_jacobians(x, u);
        let next = guard(next, x, u, 0)?;
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                stage: 0,
                x: x.iter().copied().collect(),
                u: u.iter().copied().collect(),
            });
        }
        Ok((next, a, b))
    }

    /// `N + 1` states starting at `x0`.
    pub fn rollout(&self, x0: &DVector<f64>, u_seq: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let mut states = Vec::with_capacity(u_seq.len() + 1);
        states.push(x0.clone());
        for (i, u) in u_seq.iter().enumerate() {
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("input {i} is not finite")));
            }
            let next = self.step(&states[i], u).map_err(|e| match e {
                Error::BlowUp { x, u, .. } => Error::BlowUp { stage: i, x, u },
                other => other,
            })?;
            states.push(next);
        }
        Ok(states)
    }

    pub fn state_in_box(&self, x: &DVector<f64>, tol: f64) -> bool {
        (0..self.nx()).all(|i| x[i] <= self.x_hi[i] + tol && x[i] >= self.x_lo[i] - tol)
    }

    pub fn input_in_box(&self, u: &DVector<f64>, tol: f64) -> bool {
        (0..self.nu()).all(|i| u[i] <= self.u_hi[i] + tol && u[i] >= self.u_lo[i] - tol)
    }

    /// `‖f(x̄, ū) − x̄‖∞`
    pub fn equilibrium_residual(&self) -> Result<f64> {
        let next = self.step(&self.x_eq, &self.u_eq)?;
        Ok((next - &self.x_eq).amax())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nx();
        let m = self.nu();
        if self.x_lo.len() != n || self.x_hi.len() != n || self.u_lo.len() != m || self.u_hi.len() != m {
            return Err(Error::Dimension(format!("{}: bound dimensions", self.name)));
        }
        if self.state_scale.len() != n || self.input_scale.len() != m {
            return Err(Error::Dimension(format!("{}: scale dimensions", self.name)));
        }
        if !self.state_in_box(&self.x_eq, 0.0) || !self.input_in_box(&self.u_eq, 0.0) {
            return Err(Error::Config(format!(
                "{}: equilibrium lies outside the constraint boxes",
                self.name
            )));
        }
        Ok(())
    }
}

fn guard(next: DVector<f64>, x: &DVector<f64>, u: &DVector<f64>, stage: usize) -> Result<DVector<f64>> {
    if next.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_LIMIT) {
        return Err(Error::BlowUp {
            stage,
            x: x.iter().copied().collect(),
            u: u.iter().copied().collect(),
        });
    }
    Ok(next)
}
