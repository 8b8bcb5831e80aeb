//! Horizon-`N` optimal control problems condensed to input-only form.
//!
//! Decisions are the stacked transformed inputs `u^c = (u^c_0, …, u^c_{N−1})`;
//! states are eliminated by rollout. Constraints `g(x0, u^c) ≤ 0` are stacked
//! in a fixed order, see [`RowKind`]:
//!
//! 1. for each stage `i = 0..N−1` and input `j`: `u_j − ū_j^max`, then
//!    `u_j^min − u_j` (rows with infinite bounds are omitted);
//! 2. for each stage `i = 1..N−1` and state `j`: `x_j − x_j^max`, then
//!    `x_j^min − x_j`;
//! 3. terminal rows: `A_f x_N − b_f` for a polyhedral set, or the pairs
//!    `x_N,j − x̄_j`, `x̄_j − x_N,j` for an equality constraint.

mod condense;
mod presets;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{sample_initial_conditions, DiscreteModel, InitialConditionSet, InputTransform};
use crate::nlp::{sqp_solve, sqp_solve_warm, violation, FeasibilityProblem, SolverResult, SolverStatus, SqpOptions};
use crate::numerics::Polyhedron;

pub use condense::{CondensedOcp, OcpProblem, Trajectory};
pub use presets::{cstr_spec, example1_spec, robot_spec, synchrotron_spec, synchrotron_terminal};

#[derive(Debug, Clone, PartialEq)]
pub enum StageCost {
    /// `½((x−x_r)ᵀQ(x−x_r) + (u−u_r)ᵀR(u−u_r))`
    Quadratic {
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        x_ref: DVector<f64>,
        u_ref: DVector<f64>,
    },
    /// `−x_p u_f + ε uᵀu`: negative production rate with Tikhonov term.
    Economic {
        product_state: usize,
        flow_input: usize,
        eps: f64,
    },
}

impl StageCost {
    pub fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        match self {
            StageCost::Quadratic { q, r, x_ref, u_ref } => {
                let dx = x - x_ref;
                let du = u - u_ref;
                0.5 * (dx.dot(&(q * &dx)) + du.dot(&(r * &du)))
            }
            StageCost::Economic {
                product_state,
                flow_input,
                eps,
            } => -x[*product_state] * u[*flow_input] + eps * u.norm_squared(),
        }
    }

    /// `(∂ℓ/∂x, ∂ℓ/∂u)`
    pub fn grad(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match self {
            StageCost::Quadratic { q, r, x_ref, u_ref } => (q * (x - x_ref), r * (u - u_ref)),
            StageCost::Economic {
                product_state,
                flow_input,
                eps,
            } => {
                let mut gx = DVector::zeros(x.len());
                gx[*product_state] = -u[*flow_input];
                let mut gu = u * (2.0 * eps);
                gu[*flow_input] -= x[*product_state];
                (gx, gu)
            }
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, StageCost::Quadratic { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalCost {
    None,
    /// `½ (x−x_r)ᵀ P (x−x_r)`
    Quadratic { p: DMatrix<f64>, x_ref: DVector<f64> },
}

impl TerminalCost {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            TerminalCost::None => 0.0,
            TerminalCost::Quadratic { p, x_ref } => {
                let dx = x - x_ref;
                0.5 * dx.dot(&(p * &dx))
            }
        }
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            TerminalCost::None => DVector::zeros(x.len()),
            TerminalCost::Quadratic { p, x_ref } => p * (x - x_ref),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalSet {
    None,
    Polyhedron(Polyhedron),
    /// `x_N = x̄`, encoded as paired inequalities.
    Equality(DVector<f64>),
}

impl TerminalSet {
    pub fn num_rows(&self) -> usize {
        match self {
            TerminalSet::None => 0,
            TerminalSet::Polyhedron(p) => p.num_rows(),
            TerminalSet::Equality(x) => 2 * x.len(),
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            TerminalSet::None => true,
            TerminalSet::Polyhedron(p) => p.contains(x, tol),
            TerminalSet::Equality(xe) => (x - xe).amax() <= tol,
        }
    }
}

/// Feedback `κ` used to extend a shifted input sequence by one stage.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalFeedback {
    None,
    /// `κ(x) = ū + K (x − x̄)`
    Linear {
        k: DMatrix<f64>,
        x_eq: DVector<f64>,
        u_eq: DVector<f64>,
    },
    /// `κ(x) = ū`
    Constant(DVector<f64>),
}

impl TerminalFeedback {
    pub fn eval(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            TerminalFeedback::None => None,
            TerminalFeedback::Linear { k, x_eq, u_eq } => Some(u_eq + k * (x - x_eq)),
            TerminalFeedback::Constant(u) => Some(u.clone()),
        }
    }
}

/// Meaning of one entry of `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    InputUpper { stage: usize, index: usize },
    InputLower { stage: usize, index: usize },
    StateUpper { stage: usize, index: usize },
    StateLower { stage: usize, index: usize },
    /// Row of `A_f x_N ≤ b_f`.
    TerminalRow { row: usize },
    /// `x_N,j − x̄_j ≤ 0`
    TerminalUpper { index: usize },
    /// `x̄_j − x_N,j ≤ 0`
    TerminalLower { index: usize },
}

#[derive(Debug, Clone)]
pub struct OcpSpec {
    pub name: String,
    pub model: DiscreteModel,
    pub horizon: usize,
    pub stage_cost: StageCost,
    pub terminal_cost: TerminalCost,
    pub terminal_set: TerminalSet,
    pub terminal_feedback: TerminalFeedback,
    pub transform: InputTransform,
}

impl OcpSpec {
    pub fn nx(&self) -> usize {
        self.model.nx()
    }

    pub fn nu(&self) -> usize {
        self.model.nu()
    }

    pub fn dim_u(&self) -> usize {
        self.horizon * self.nu()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        self.model.validate()?;
        if let TerminalSet::Polyhedron(p) = &self.terminal_set {
            if p.dim() != self.nx() {
                return Err(Error::Dimension("terminal set dimension".into()));
            }
        }
        Ok(())
    }

    /// Row layout of `g`; a pure function of the spec.
    pub fn constraint_layout(&self) -> Vec<RowKind> {
        let m = &self.model;
        let mut rows = Vec::new();
        for stage in 0..self.horizon {
            for index in 0..self.nu() {
                if m.u_hi[index].is_finite() {
                    rows.push(RowKind::InputUpper { stage, index });
                }
                if m.u_lo[index].is_finite() {
                    rows.push(RowKind::InputLower { stage, index });
                }
            }
        }
        for stage in 1..self.horizon {
            for index in 0..self.nx() {
                if m.x_hi[index].is_finite() {
                    rows.push(RowKind::StateUpper { stage, index });
                }
                if m.x_lo[index].is_finite() {
                    rows.push(RowKind::StateLower { stage, index });
                }
            }
        }
        match &self.terminal_set {
            TerminalSet::None => {}
            TerminalSet::Polyhedron(p) => {
                rows.extend((0..p.num_rows()).map(|row| RowKind::TerminalRow { row }));
            }
            TerminalSet::Equality(x) => {
                for index in 0..x.len() {
                    rows.push(RowKind::TerminalUpper { index });
                    rows.push(RowKind::TerminalLower { index });
                }
            }
        }
        rows
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_layout().len()
    }

    pub fn condense(&self, x0: &DVector<f64>) -> CondensedOcp<'_> {
        CondensedOcp::new(self, x0.clone())
    }

    /// Decision stack whose physical inputs hold `ū` at every stage along
    /// the resulting trajectory from `x0`.
    pub fn equilibrium_stack(&self, x0: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.nu();
        let mut stack = DVector::zeros(self.dim_u());
        let mut x = x0.clone();
        for i in 0..self.horizon {
            let uc = self.transform.inverse(&self.model.u_eq, &x);
            stack.rows_mut(i * m, m).copy_from(&uc);
            x = self.model.step(&x, &self.model.u_eq)?;
        }
        Ok(stack)
    }

    /// SHA-256 over a canonical text rendering of every field.
    pub fn fingerprint(&self) -> String {
        let text = format!(
            "{}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}",
            self.name,
            self.model.dynamics,
            self.stage_cost,
            self.terminal_cost,
            self.terminal_set,
            self.terminal_feedback,
            self.transform,
            self.horizon,
            self.model.x_lo.as_slice(),
            self.model.x_hi.as_slice(),
            self.model.u_lo.as_slice(),
            self.model.u_hi.as_slice(),
            self.model.x_eq.as_slice(),
            self.model.u_eq.as_slice(),
        );
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone)]
pub enum SeedOutcome {
    Feasible(DVector<f64>),
    /// No feasible input sequence found; `violation` is the smallest reached.
    Infeasible { violation: f64 },
}

/// A feasible decision stack for `x0` from the constraint system alone
/// (constant objective). Cheap candidates (zero correction, equilibrium
/// inputs) are accepted without iterating.
pub fn feasible_seed(spec: &OcpSpec, x0: &DVector<f64>, opts: &SqpOptions) -> Result<SeedOutcome> {
    let ocp = spec.condense(x0);
    let zero = DVector::zeros(spec.dim_u());
    let mut candidates = vec![zero.clone()];
    if let Ok(eq) = spec.equilibrium_stack(x0) {
        candidates.push(eq);
    }
    for c in &candidates {
        if let Ok((_, g)) = ocp.evaluate(c) {
            if violation(&g) <= opts.feas_tol {
                return Ok(SeedOutcome::Feasible(c.clone()));
            }
        }
    }
    let problem = OcpProblem::full(ocp);
    let feas = FeasibilityProblem { inner: &problem };
    let res = sqp_solve(&feas, &zero, false, opts)?;
    log::debug!(
        "feasible_seed: status {:?}, violation {:.2e}, {} iterations",
        res.status,
        res.constraint_violation,
        res.iterations
    );
    if res.constraint_violation <= opts.feas_tol && res.status != SolverStatus::Infeasible {
        Ok(SeedOutcome::Feasible(res.y_star))
    } else {
        Ok(SeedOutcome::Infeasible {
            violation: res.constraint_violation,
        })
    }
}

/// The first `n` of up to `max_draws` seeded samples of `set` for which
/// `𝒫(x0)` is feasible (rejection sampling).
pub fn sample_feasible_states(
    spec: &OcpSpec,
    set: &InitialConditionSet,
    n: usize,
    seed: u64,
    max_draws: usize,
    opts: &SqpOptions,
) -> Result<Vec<DVector<f64>>> {
    let draws = sample_initial_conditions(set, &spec.model, max_draws.max(n), seed)?;
    let mut kept = Vec::with_capacity(n);
    for x in draws {
        if let SeedOutcome::Feasible(_) = feasible_seed(spec, &x, opts)? {
            kept.push(x);
            if kept.len() == n {
                return Ok(kept);
            }
        }
    }
    Err(Error::Config(format!(
        "only {} of {} sampled initial conditions admit a feasible input sequence",
        kept.len(),
        max_draws.max(n)
    )))
}

/// Solve `𝒫(x0)` from a feasible start; `None` when no feasible start exists.
pub fn solve_ocp(spec: &OcpSpec, x0: &DVector<f64>, opts: &SqpOptions) -> Result<Option<SolverResult>> {
    match feasible_seed(spec, x0, opts)? {
        SeedOutcome::Feasible(u0) => solve_ocp_from(spec, x0, &u0, opts).map(Some),
        SeedOutcome::Infeasible { violation } => {
            log::debug!("solve_ocp: no feasible start (violation {violation:.2e})");
            Ok(None)
        }
    }
}

/// Solve `𝒫(x0)` from a feasible stack `u0` (warm start).
pub fn solve_ocp_from(spec: &OcpSpec, x0: &DVector<f64>, u0: &DVector<f64>, opts: &SqpOptions) -> Result<SolverResult> {
    solve_ocp_warm(spec, x0, u0, opts, None)
}

/// [`solve_ocp_from`] with an initial quasi-Newton matrix.
pub fn solve_ocp_warm(
    spec: &OcpSpec,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    opts: &SqpOptions,
    quasi_newton: Option<DMatrix<f64>>,
) -> Result<SolverResult> {
    let problem = OcpProblem::full(spec.condense(x0));
    sqp_solve_warm(&problem, u0, true, opts, quasi_newton)
}
