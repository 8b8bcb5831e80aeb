//! Dense linear-algebra and control primitives shared by the rest of the crate.

mod eig;
mod invariant;
mod polyhedron;
mod riccati;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use eig::sym_eig_desc;
pub use invariant::{mpi_set, MpiOptions};
pub use polyhedron::Polyhedron;
pub use riccati::{dare_residual, dare_solve, spectral_radius, RiccatiSolution};

/// A real symmetric matrix. The input is symmetrized as `(M + Mᵀ)/2` on
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymMatrix(sym))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `‖QᵀQ − I‖∞` measured entry-wise.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    let n = gram.nrows();
    max_abs(&(gram - DMatrix::identity(n, n)))
}
