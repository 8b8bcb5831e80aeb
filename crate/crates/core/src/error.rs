use thiserror::Error;

use crate::numerics::Polyhedron;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("iteration did not converge within the cap of {cap} iterations ({what})")]
    Divergence { what: &'static str, cap: usize },

    /// The invariant-set iteration hit its cap. The carried polyhedron is the
    /// last iterate, an inner approximation that is not certified invariant.
    #[error("invariant-set iteration stopped after {iterations} iterations without a fixpoint")]
    PartialInvariantSet {
        iterations: usize,
        last: Box<Polyhedron>,
    },

    #[error("integration blow-up at stage {stage}: x = {x:?}, u = {u:?}")]
    BlowUp {
        stage: usize,
        x: Vec<f64>,
        u: Vec<f64>,
    },

    #[error("non-finite value in {what} at iterate {iterate:?}")]
    NonFinite { what: String, iterate: Vec<f64> },

    #[error("unbounded problem: {0}")]
    Unbounded(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("sensitivity estimation failed: {0}")]
    Estimation(String),

    #[error("unsupported sensitivity kind: {0}")]
    UnsupportedKind(String),

    #[error("feasible-guess constructor violated its contract: {0}")]
    ConstructorContract(String),

    #[error("recursive feasibility violated at step {step}: guess violation {violation:e}")]
    RecursiveFeasibility { step: usize, violation: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
