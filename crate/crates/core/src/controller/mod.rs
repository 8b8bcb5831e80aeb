//! Receding-horizon controller over a reduced decision space.
//!
//! At each step the decision stack is restricted to
//! `u = T1 v + μ T2 w̃`, where `w̃ = T2ᵀ ũ` is the inactive part of a feasible
//! guess `ũ` carried between steps. `(v, μ) = (T1ᵀũ, 1)` reproduces the
//! guess, so the reduced problem is feasible whenever the guess is, and the
//! candidate is adopted only if it does not increase the cost over the guess.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nlp::{sqp_solve, sqp_solve_warm, violation, FeasibilityProblem, SolverStatus, SqpOptions};
use crate::ocp::{feasible_seed, OcpProblem, OcpSpec, SeedOutcome, TerminalFeedback};
use crate::subspace::Projector;
use crate::FEAS_TOL;

/// Guess violation accepted without restoration for the heuristic turnpike
/// constructor.
pub const TURNPIKE_GUESS_TOL: f64 = 1e-3;

/// Slack in the cost-decrease test `J(u_k) ≤ J(ũ_k) + slack`.
pub const COST_DECREASE_SLACK: f64 = 1e-9;

/// Feasibility target of the inner solves. Tighter than the guess check
/// (`FEAS_TOL`) so that small residuals on terminal equalities do not grow
/// past it when shifted along an unstable equilibrium.
pub const SOLVER_FEAS_TOL: f64 = 1e-8;

/// Solver options used by [`Controller`] unless overridden.
pub fn solver_options() -> SqpOptions {
    SqpOptions {
        feas_tol: SOLVER_FEAS_TOL,
        ..SqpOptions::default()
    }
}

/// Rule producing the next feasible guess from the applied stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GuessConstructor {
    /// Drop the first stage and append `κ` of the last predicted state.
    ShiftTerminal,
    /// Shift stages `1..L−1`, insert `ū` at stage `L` (1-based), keep the tail.
    TurnpikeInsert { l: usize },
}

impl GuessConstructor {
    /// Shift-and-append when terminal feedback exists, otherwise turnpike
    /// insertion in the middle of the horizon.
    pub fn default_for(spec: &OcpSpec) -> Self {
        match spec.terminal_feedback {
            TerminalFeedback::None => GuessConstructor::TurnpikeInsert {
                l: (spec.horizon / 2).max(1),
            },
            _ => GuessConstructor::ShiftTerminal,
        }
    }

    /// Source stage of each new stage (`None` for the stage that is filled in).
    fn stage_map(&self, n: usize) -> Vec<Option<usize>> {
        match *self {
            GuessConstructor::ShiftTerminal => (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect(),
            GuessConstructor::TurnpikeInsert { l } => (0..n)
                .map(|i| {
                    if i + 1 < l {
                        Some(i + 1)
                    } else if i + 1 == l {
                        None
                    } else {
                        Some(i)
                    }
                })
                .collect(),
        }
    }
}

/// Next guess from the stack `u_prev` applied at `x_prev`, expressed for the
/// successor state `f(x_prev, u_prev,0)`.
pub fn make_guess(
    ctor: GuessConstructor,
    spec: &OcpSpec,
    u_prev: &DVector<f64>,
    x_prev: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = spec.horizon;
    let m = spec.nu();
    if let GuessConstructor::TurnpikeInsert { l } = ctor {
        if l == 0 || l > n {
            return Err(Error::Config(format!("turnpike insertion index {l} outside 1..={n}")));
        }
    }
    let traj = spec.condense(x_prev).simulate(u_prev, false)?;
    let mut guess = DVector::zeros(n * m);
    for (i, src) in ctor.stage_map(n).into_iter().enumerate() {
        // the filled-in stage starts from the previously predicted x_{i+1}
        let block = match src {
            Some(j) => u_prev.rows(j * m, m).into_owned(),
            None => {
                let x = &traj.states[i + 1];
                let u = match ctor {
                    GuessConstructor::ShiftTerminal => spec.terminal_feedback.eval(x).ok_or_else(|| {
                        Error::ConstructorContract("shift-and-append needs a terminal feedback".into())
                    })?,
                    GuessConstructor::TurnpikeInsert { .. } => spec.model.u_eq.clone(),
                };
                if !spec.model.input_in_box(&u, FEAS_TOL) {
                    return Err(Error::ConstructorContract(format!(
                        "appended input {:?} leaves the input box",
                        u.as_slice()
                    )));
                }
                spec.transform.inverse(&u, x)
            }
        };
        guess.rows_mut(i * m, m).copy_from(&block);
    }
    Ok(guess)
}

/// Decision map `[T1 | T2 w̃]` (just `T1` when `T2` is empty).
pub fn reduced_map(proj: &Projector, w_tilde: &DVector<f64>) -> DMatrix<f64> {
    let n = proj.dim();
    if proj.q == n {
        return proj.t1.clone();
    }
    let mut map = DMatrix::zeros(n, proj.q + 1);
    map.columns_mut(0, proj.q).copy_from(&proj.t1);
    map.set_column(proj.q, &(&proj.t2 * w_tilde));
    map
}

/// Reduced problem over `(v, μ)` with `u = T1 v + μ T2 w̃`.
pub fn build_reduced<'a>(spec: &'a OcpSpec, proj: &Projector, x: &DVector<f64>, w_tilde: &DVector<f64>) -> OcpProblem<'a> {
    OcpProblem::mapped(spec.condense(x), reduced_map(proj, w_tilde))
}

/// Naive reduced problem over `v` alone, `u = T1 v`.
pub fn build_naive_reduced<'a>(spec: &'a OcpSpec, proj: &Projector, x: &DVector<f64>) -> OcpProblem<'a> {
    OcpProblem::mapped(spec.condense(x), proj.t1.clone())
}

/// Whether the naive reduced problem has a feasible point; searched from `v = 0`.
pub fn naive_reduced_feasibility(
    spec: &OcpSpec,
    proj: &Projector,
    x: &DVector<f64>,
    opts: &SqpOptions,
) -> Result<SeedOutcome> {
    let problem = build_naive_reduced(spec, proj, x);
    let feas = FeasibilityProblem { inner: &problem };
    let v0 = DVector::zeros(proj.q);
    let (_, g0) = problem.ocp.evaluate(&problem.stack(&v0))?;
    if violation(&g0) <= opts.feas_tol {
        return Ok(SeedOutcome::Feasible(v0));
    }
    let res = sqp_solve(&feas, &v0, false, opts)?;
    if res.constraint_violation <= opts.feas_tol && res.status != SolverStatus::Infeasible {
        Ok(SeedOutcome::Feasible(res.y_star))
    } else {
        Ok(SeedOutcome::Infeasible {
            violation: res.constraint_violation,
        })
    }
}

/// Memory carried between steps.
#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Feasible guess `ũ_k` (transformed coordinates).
    pub u_tilde: DVector<f64>,
    /// `T2ᵀ ũ_k` (empty for full-order control).
    pub w_tilde: DVector<f64>,
    pub k: usize,
    /// Stack adopted at the previous step.
    pub u_prev: Option<DVector<f64>>,
    /// Quasi-Newton matrix of the previous full-order solve, already shifted.
    quasi_newton: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    ReducedOptimal,
    FallbackGuess,
}

impl StepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StepMode::ReducedOptimal => "reduced_optimal",
            StepMode::FallbackGuess => "fallback_guess",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Physical input applied to the plant.
    pub applied: DVector<f64>,
    /// Adopted stack `u_k` (transformed coordinates).
    pub stack: DVector<f64>,
    pub mode: StepMode,
    /// `J(x_k, ũ_k)`
    pub cost_guess: f64,
    /// `J(x_k, u_k)`
    pub cost: f64,
    /// `max g(x_k, ũ_k)`
    pub guess_violation: f64,
    /// `max g(x_k, u_k)`
    pub violation: f64,
    pub solver_status: SolverStatus,
    pub solver_iterations: usize,
    pub kkt_residual: f64,
}

/// How the decision stack is searched at each step.
#[derive(Debug, Clone)]
pub enum Policy {
    Reduced(Projector),
    FullOrder,
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub spec: OcpSpec,
    pub policy: Policy,
    pub ctor: GuessConstructor,
    pub opts: SqpOptions,
}

impl Controller {
    pub fn reduced(spec: OcpSpec, proj: Projector, ctor: GuessConstructor) -> Result<Self> {
        if proj.dim() != spec.dim_u() {
            return Err(Error::Dimension(format!(
                "projector acts on {} entries but N·m = {}",
                proj.dim(),
                spec.dim_u()
            )));
        }
        Ok(Controller {
            spec,
            policy: Policy::Reduced(proj),
            ctor,
            opts: solver_options(),
        })
    }

    pub fn full_order(spec: OcpSpec, ctor: GuessConstructor) -> Self {
        Controller {
            spec,
            policy: Policy::FullOrder,
            ctor,
            opts: solver_options(),
        }
    }

    fn inactive_part(&self, u: &DVector<f64>) -> DVector<f64> {
        match &self.policy {
            Policy::Reduced(p) => p.t2.tr_mul(u),
            Policy::FullOrder => DVector::zeros(0),
        }
    }

    /// Feasible initial stack `ũ₀` for `x0`: a seed from the constraint
    /// system, improved by one full-order solve when that solve succeeds.
    /// Refuses when `x0` admits no feasible input sequence.
    pub fn initial_guess(&self, x0: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.spec.model.state_in_box(x0, FEAS_TOL) {
            return Err(Error::InvalidInput(format!("x0 = {:?} lies outside the state box", x0.as_slice())));
        }
        let seed = match feasible_seed(&self.spec, x0, &self.opts)? {
            SeedOutcome::Feasible(u0) => u0,
            SeedOutcome::Infeasible { violation } => {
                return Err(Error::Infeasible(format!(
                    "no feasible input sequence from x0 = {:?} (violation {violation:e})",
                    x0.as_slice()
                )))
            }
        };
        let problem = OcpProblem::full(self.spec.condense(x0));
        let res = sqp_solve(&problem, &seed, true, &self.opts)?;
        if res.status == SolverStatus::FallbackToStart || res.constraint_violation > self.opts.feas_tol {
            log::debug!("initial full-order solve kept the seed ({:?})", res.status);
            return Ok(seed);
        }
        Ok(res.y_star)
    }

    /// Controller memory for a given feasible initial stack.
    pub fn start(&self, u0: DVector<f64>) -> ControllerState {
        ControllerState {
            w_tilde: self.inactive_part(&u0),
            u_tilde: u0,
            k: 0,
            u_prev: None,
            quasi_newton: None,
        }
    }

    /// [`Controller::initial_guess`] followed by [`Controller::start`].
    pub fn initialize(&self, x0: &DVector<f64>) -> Result<ControllerState> {
        Ok(self.start(self.initial_guess(x0)?))
    }

    /// Bring the guess back inside the constraints when the heuristic
    /// constructor left it too far outside.
    fn restore(&self, x: &DVector<f64>, guess: &DVector<f64>, step: usize, viol: f64) -> Result<DVector<f64>> {
        let problem = OcpProblem::full(self.spec.condense(x));
        let feas = FeasibilityProblem { inner: &problem };
        let res = sqp_solve(&feas, guess, false, &self.opts)?;
        if res.constraint_violation <= self.opts.feas_tol {
            log::debug!("step {step}: guess restored from violation {viol:.2e}");
            Ok(res.y_star)
        } else {
            Err(Error::RecursiveFeasibility { step, violation: viol })
        }
    }

    /// One closed-loop step at the measured state `x`.
    pub fn step(&self, state: &ControllerState, x: &DVector<f64>) -> Result<(StepOutcome, ControllerState)> {
        let ocp = self.spec.condense(x);
        let (mut cost_guess, g_guess) = ocp.evaluate(&state.u_tilde)?;
        let guess_violation = violation(&g_guess);
        let mut u_tilde = state.u_tilde.clone();
        match self.ctor {
            GuessConstructor::ShiftTerminal if guess_violation > FEAS_TOL => {
                return Err(Error::RecursiveFeasibility {
                    step: state.k,
                    violation: guess_violation,
                })
            }
            GuessConstructor::TurnpikeInsert { .. } if guess_violation > TURNPIKE_GUESS_TOL => {
                u_tilde = self.restore(x, &u_tilde, state.k, guess_violation)?;
                cost_guess = ocp.cost(&u_tilde)?;
            }
            _ => {}
        }
        // a guess inside FEAS_TOL but outside the solver tolerance is still
        // solved, just without the never-worse-than-start guarantee
        let guess_feasible = violation(&ocp.constraints(&u_tilde)?) <= self.opts.feas_tol;

        let (candidate, status, iterations, kkt, qn) = match &self.policy {
            Policy::Reduced(proj) => {
                let w_tilde = proj.t2.tr_mul(&u_tilde);
                let problem = build_reduced(&self.spec, proj, x, &w_tilde);
                let mut y0 = proj.t1.tr_mul(&u_tilde);
                if proj.q < proj.dim() {
                    y0 = y0.push(1.0);
                }
                let res = sqp_solve(&problem, &y0, guess_feasible, &self.opts)?;
                (problem.stack(&res.y_star), res.status, res.iterations, res.kkt_residual, None)
            }
            Policy::FullOrder => {
                let problem = OcpProblem::full(ocp.clone());
                let res = sqp_solve_warm(&problem, &u_tilde, guess_feasible, &self.opts, state.quasi_newton.clone())?;
                (res.y_star, res.status, res.iterations, res.kkt_residual, res.quasi_newton)
            }
        };

        // adopt only a feasible candidate that does not increase the cost
        let (cost_c, g_c) = ocp.evaluate(&candidate)?;
        let viol_c = violation(&g_c);
        let adopt = status != SolverStatus::FallbackToStart
            && viol_c <= self.opts.feas_tol
            && cost_c <= cost_guess + COST_DECREASE_SLACK;
        let (stack, cost, viol, mode) = if adopt {
            (candidate, cost_c, viol_c, StepMode::ReducedOptimal)
        } else {
            let v = violation(&ocp.constraints(&u_tilde)?);
            (u_tilde.clone(), cost_guess, v, StepMode::FallbackGuess)
        };

        let m = self.spec.nu();
        let applied = self.spec.transform.apply(&stack.rows(0, m).into_owned(), x);
        let next_guess = make_guess(self.ctor, &self.spec, &stack, x)?;
        let quasi_newton = qn.map(|b| shift_stage_matrix(&b, m, &self.ctor.stage_map(self.spec.horizon)));
        let next = ControllerState {
            w_tilde: self.inactive_part(&next_guess),
            u_tilde: next_guess,
            k: state.k + 1,
            u_prev: Some(stack.clone()),
            quasi_newton,
        };
        Ok((
            StepOutcome {
                applied,
                stack,
                mode,
                cost_guess,
                cost,
                guess_violation,
                violation: viol,
                solver_status: status,
                solver_iterations: iterations,
                kkt_residual: kkt,
            },
            next,
        ))
    }
}

/// Re-index a stage-blocked matrix the same way the guess is re-indexed; the
/// filled-in stage gets the mean diagonal.
fn shift_stage_matrix(b: &DMatrix<f64>, m: usize, map: &[Option<usize>]) -> DMatrix<f64> {
    let n = b.nrows();
    let mean_diag = b.diagonal().sum() / n as f64;
    let mut out = DMatrix::zeros(n, n);
    for (i, si) in map.iter().enumerate() {
        for (j, sj) in map.iter().enumerate() {
            match (si, sj) {
                (Some(si), Some(sj)) => out
                    .view_mut((i * m, j * m), (m, m))
                    .copy_from(&b.view((si * m, sj * m), (m, m))),
                (None, None) if i == j => out
                    .view_mut((i * m, i * m), (m, m))
                    .fill_diagonal(mean_diag),
                _ => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
