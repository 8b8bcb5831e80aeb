//! Problem set-ups for the benchmark plants.

use nalgebra::{DMatrix, DVector};

use super::{OcpSpec, StageCost, TerminalCost, TerminalFeedback, TerminalSet};
use crate::error::Result;
use crate::model::{plants, DiscreteModel, Dynamics, InputTransform};
use crate::numerics::{dare_solve, mpi_set, MpiOptions, Polyhedron};

/// LQR terminal ingredients for the synchrotron.
#[derive(Debug, Clone)]
pub struct SynchrotronTerminal {
    /// Riccati solution; the terminal cost is `½ xᵀPx`.
    pub p: DMatrix<f64>,
    /// LQR gain, `u = K x`.
    pub k: DMatrix<f64>,
    /// Maximal positively invariant set of `A + BK` inside
    /// `{x ∈ 𝕏 : Kx ∈ 𝕌}`.
    pub omega: Polyhedron,
}

fn synchrotron_weights() -> (DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 8.0, 2.0, 8.0])),
        DMatrix::from_diagonal(&DVector::from_vec(vec![0.9, 0.9])),
    )
}

pub fn synchrotron_terminal(model: &DiscreteModel) -> Result<SynchrotronTerminal> {
    let Dynamics::Linear { a, b } = &model.dynamics else {
        return Err(crate::Error::Config("synchrotron terminal set needs a linear model".into()));
    };
    let (q, r) = synchrotron_weights();
    let sol = dare_solve(a, b, &q, &r)?;
    let x_box = Polyhedron::from_box(model.x_lo.as_slice(), model.x_hi.as_slice())?;
    let u_box = Polyhedron::from_box(model.u_lo.as_slice(), model.u_hi.as_slice())?;
    let u_in_x = Polyhedron::new(&u_box.a * &sol.k, u_box.b.clone())?;
    let base = x_box.intersect(&u_in_x)?;
    let a_cl = a + b * &sol.k;
    let omega = mpi_set(&a_cl, &base, &MpiOptions::default())?;
    Ok(SynchrotronTerminal {
        p: sol.p,
        k: sol.k,
        omega,
    })
}

/// Quadratic regulation with LQR prestabilization, terminal cost `½xᵀPx`,
/// terminal set the MPI set and `κ(x) = Kx`.
pub fn synchrotron_spec(horizon: usize) -> Result<OcpSpec> {
    let model = plants::synchrotron();
    let term = synchrotron_terminal(&model)?;
    let (q, r) = synchrotron_weights();
    let n = model.nx();
    let m = model.nu();
    Ok(OcpSpec {
        name: "synchrotron".into(),
        stage_cost: StageCost::Quadratic {
            q,
            r,
            x_ref: DVector::zeros(n),
            u_ref: DVector::zeros(m),
        },
        terminal_cost: TerminalCost::Quadratic {
            p: term.p,
            x_ref: DVector::zeros(n),
        },
        terminal_set: TerminalSet::Polyhedron(term.omega),
        terminal_feedback: TerminalFeedback::Linear {
            k: term.k.clone(),
            x_eq: DVector::zeros(n),
            u_eq: DVector::zeros(m),
        },
        transform: InputTransform::Prestabilize {
            k: term.k,
            x_eq: DVector::zeros(n),
            u_eq: DVector::zeros(m),
        },
        horizon,
        model,
    })
}

/// Set-point regulation with a terminal equality constraint and `κ ≡ ū`.
pub fn robot_spec(horizon: usize) -> Result<OcpSpec> {
    let model = plants::robot();
    Ok(OcpSpec {
        name: "robot".into(),
        stage_cost: StageCost::Quadratic {
            q: DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1.0, 0.5, 0.5])),
            r: DMatrix::identity(2, 2),
            x_ref: model.x_eq.clone(),
            u_ref: model.u_eq.clone(),
        },
        terminal_cost: TerminalCost::None,
        terminal_set: TerminalSet::Equality(model.x_eq.clone()),
        terminal_feedback: TerminalFeedback::Constant(model.u_eq.clone()),
        transform: InputTransform::None,
        horizon,
        model,
    })
}

/// Economic cost `−c_B u_1 + 10⁻³ uᵀu` without terminal ingredients; inputs
/// are shifted by the optimal steady-state input.
pub fn cstr_spec(horizon: usize) -> Result<OcpSpec> {
    let model = plants::cstr();
    Ok(OcpSpec {
        name: "cstr".into(),
        stage_cost: StageCost::Economic {
            product_state: 1,
            flow_input: 0,
            eps: 1e-3,
        },
        terminal_cost: TerminalCost::None,
        terminal_set: TerminalSet::None,
        terminal_feedback: TerminalFeedback::None,
        transform: InputTransform::SteadyShift {
            u_eq: model.u_eq.clone(),
        },
        horizon,
        model,
    })
}

/// Double integrator, `ℓ = xᵀx + u²`, `N = 5`, `x_5 = 0`, no other constraints.
pub fn example1_spec() -> OcpSpec {
    let model = plants::example1();
    OcpSpec {
        name: "example1".into(),
        stage_cost: StageCost::Quadratic {
            q: DMatrix::identity(2, 2) * 2.0,
            r: DMatrix::identity(1, 1) * 2.0,
            x_ref: DVector::zeros(2),
            u_ref: DVector::zeros(1),
        },
        terminal_cost: TerminalCost::None,
        terminal_set: TerminalSet::Equality(DVector::zeros(2)),
        terminal_feedback: TerminalFeedback::Constant(DVector::zeros(1)),
        transform: InputTransform::None,
        horizon: 5,
        model,
    }
}
