//! Dense QP and SQP solvers for the condensed control problems.

mod qp;
mod sqp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use qp::{kkt_residual, lp_minimize, qp_solve, qp_solve_from, QpOptions, QpProblem};
pub use sqp::{sqp_solve, sqp_solve_warm, SqpOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    MaxIter,
    Infeasible,
    FallbackToStart,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub y_star: DVector<f64>,
    pub cost_star: f64,
    pub status: SolverStatus,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub iterations: usize,
    /// Inequality multipliers followed by equality multipliers.
    pub multipliers: DVector<f64>,
    /// Farkas vector for infeasible QPs.
    pub certificate: Option<DVector<f64>>,
    /// Inequality rows active at the solution (QP only).
    pub working_set: Vec<usize>,
    /// Final quasi-Newton matrix when the problem supplies no Hessian.
    pub quasi_newton: Option<DMatrix<f64>>,
}

/// First-order data at a point.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub grad: DVector<f64>,
    pub jac: DMatrix<f64>,
    /// Positive semi-definite model Hessian (e.g. Gauss–Newton); `None` lets the
    /// solver fall back to quasi-Newton updates.
    pub hessian: Option<DMatrix<f64>>,
}

/// `min J(y)  s.t.  g(y) ≤ 0`.
pub trait NlpProblem {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Cost and constraint values.
    fn evaluate(&self, y: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
    fn derivatives(&self, y: &DVector<f64>) -> Result<Derivatives>;
}

/// Largest positive entry of `g` (0 when all constraints hold).
pub fn violation(g: &DVector<f64>) -> f64 {
    g.iter().fold(0.0_f64, |acc, v| acc.max(*v))
}

/// Same constraints with a constant objective; its Hessian is the identity
/// so each step is the minimum-norm correction.
pub struct FeasibilityProblem<'a, P: NlpProblem + ?Sized> {
    pub inner: &'a P,
}

impl<P: NlpProblem + ?Sized> NlpProblem for FeasibilityProblem<'_, P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }

    fn evaluate(&self, y: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (_, g) = self.inner.evaluate(y)?;
        Ok((0.0, g))
    }

    fn derivatives(&self, y: &DVector<f64>) -> Result<Derivatives> {
        let d = self.inner.derivatives(y)?;
        let n = self.dim();
        Ok(Derivatives {
            grad: DVector::zeros(n),
            jac: d.jac,
            hessian: Some(DMatrix::identity(n, n)),
        })
    }
}
