use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SensitivityKind;
use crate::error::{Error, Result};
use crate::numerics::{orthonormality_defect, sym_eig_desc, SymMatrix};

pub const PROJECTOR_VERSION: u32 = 1;

/// Where a projector came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `None` for a random orthonormal basis.
    pub kind: Option<SensitivityKind>,
    pub seed: u64,
    pub n_train: usize,
    pub plant: String,
    /// [`crate::ocp::OcpSpec::fingerprint`] of the problem it was learned on.
    pub spec_hash: String,
}

/// Orthonormal split `[T1 T2]` of the decision stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub t1: DMatrix<f64>,
    pub t2: DMatrix<f64>,
    pub q: usize,
    /// Eigenvalues in the column order of `[T1 T2]` (zeros for random bases).
    pub sigma: DVector<f64>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct ProjectorFile {
    version: u32,
    dim: usize,
    q: usize,
    /// `[T1 T2]`, row-major.
    t: Vec<f64>,
    sigma: Vec<f64>,
    provenance: Provenance,
}

/// Leading `q` eigenvectors of `Ĉ` as `T1`, the rest as `T2`.
pub fn compute_projectors(c_hat: &SymMatrix, q: usize, provenance: Provenance) -> Result<Projector> {
    let (t, sigma) = sym_eig_desc(c_hat)?;
    Projector::from_basis(t, q, sigma, provenance)
}

impl Projector {
    pub fn from_basis(t: DMatrix<f64>, q: usize, sigma: DVector<f64>, provenance: Provenance) -> Result<Self> {
        let n = t.nrows();
        if !t.is_square() || sigma.len() != n {
            return Err(Error::Dimension(format!(
                "basis is {}x{} with {} eigenvalues",
                t.nrows(),
                t.ncols(),
                sigma.len()
            )));
        }
        if q == 0 || q > n {
            return Err(Error::InvalidInput(format!("active dimension q = {q} outside 1..={n}")));
        }
        let defect = orthonormality_defect(&t);
        if defect > 1e-9 {
            return Err(Error::InvalidInput(format!("basis is not orthonormal (defect {defect:e})")));
        }
        Ok(Projector {
            t1: t.columns(0, q).into_owned(),
            t2: t.columns(q, n - q).into_owned(),
            q,
            sigma,
            provenance,
        })
    }

    /// Random orthonormal basis from the QR factors of a seeded uniform matrix.
    pub fn random(dim: usize, q: usize, seed: u64, plant: &str, spec_hash: &str) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let qr = m.qr();
        let mut t = qr.q();
        let r = qr.r();
        for j in 0..dim {
            if r[(j, j)] < 0.0 {
                t.column_mut(j).neg_mut();
            }
        }
        Projector::from_basis(
            t,
            q,
            DVector::zeros(dim),
            Provenance {
                kind: None,
                seed,
                n_train: 0,
                plant: plant.into(),
                spec_hash: spec_hash.into(),
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.t1.nrows()
    }

    /// `[T1 T2]`
    pub fn basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut t = DMatrix::zeros(n, n);
        t.columns_mut(0, self.q).copy_from(&self.t1);
        t.columns_mut(self.q, n - self.q).copy_from(&self.t2);
        t
    }

    /// `‖[T1 T2]ᵀ[T1 T2] − I‖∞`
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.basis())
    }

    /// `‖T diag(σ) Tᵀ − Ĉ‖∞`
    pub fn reconstruction_error(&self, c_hat: &SymMatrix) -> f64 {
        let t = self.basis();
        let rec = &t * DMatrix::from_diagonal(&self.sigma) * t.transpose();
        crate::numerics::max_abs(&(rec - c_hat.as_matrix()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let t = self.basis();
        let n = self.dim();
        let file = ProjectorFile {
            version: PROJECTOR_VERSION,
            dim: n,
            q: self.q,
            t: (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| t[(i, j)]).collect(),
            sigma: self.sigma.iter().copied().collect(),
            provenance: self.provenance.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ProjectorFile = serde_json::from_str(&text)?;
        if file.version != PROJECTOR_VERSION {
            return Err(Error::Parse(format!(
                "projector file version {} (expected {PROJECTOR_VERSION})",
                file.version
            )));
        }
        if file.t.len() != file.dim * file.dim {
            return Err(Error::Parse("projector matrix has the wrong number of entries".into()));
        }
        let t = DMatrix::from_row_slice(file.dim, file.dim, &file.t);
        Projector::from_basis(t, file.q, DVector::from_vec(file.sigma), file.provenance)
    }
}
