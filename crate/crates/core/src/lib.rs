//! Nonlinear MPC with input spaces reduced to learned active subspaces.
//!
//! The pieces, bottom up: dense numerics (`numerics`), plant models
//! (`model`), condensed optimal control problems (`ocp`), a QP/SQP solver
//! stack (`nlp`), subspace learning from sampled sensitivities (`subspace`)
//! and the feasibility-preserving reduced controller (`controller`).

pub mod controller;
pub mod error;
pub mod model;
pub mod nlp;
pub mod numerics;
pub mod ocp;
pub mod subspace;

pub use error::{Error, Result};

/// Constraint satisfaction tolerance in scaled units, shared by all modules.
pub const FEAS_TOL: f64 = 1e-6;
