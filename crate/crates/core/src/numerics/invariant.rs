use nalgebra::{DMatrix, DVector};

use super::Polyhedron;
use crate::error::{Error, Result};
use crate::nlp::lp_minimize;

#[derive(Debug, Clone)]
pub struct MpiOptions {
    pub max_iter: usize,
    /// A candidate row is redundant when its LP maximum exceeds the offset by
    /// at most this much.
    pub tol: f64,
}

impl Default for MpiOptions {
    fn default() -> Self {
        MpiOptions {
            max_iter: 100,
            tol: 1e-9,
        }
    }
}

/// Maximal positively invariant subset of `base` under `x⁺ = A_cl x`.
///
/// Pre-set iteration `Ω_{k+1} = Ω_k ∩ {x : A_cl x ∈ Ω_k}`; each iteration only
/// composes the rows added last time with `A_cl` and keeps those an LP shows to
/// be non-redundant. Stops when no row survives. The result has redundant rows
/// removed and unit-norm rows.
pub fn mpi_set(a_cl: &DMatrix<f64>, base: &Polyhedron, opts: &MpiOptions) -> Result<Polyhedron> {
    let n = base.dim();
    if a_cl.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "closed-loop matrix is {}x{} but the base set lives in R^{n}",
            a_cl.nrows(),
            a_cl.ncols()
        )));
    }
    let origin = DVector::zeros(n);
    if base.num_rows() == 0 || !base.contains(&origin, 0.0) {
        return Err(Error::InvalidInput(
            "base set must be bounded and contain the origin".into(),
        ));
    }

    let base = base.normalized();
    let mut rows: Vec<DVector<f64>> = (0..base.num_rows()).map(|i| base.a.row(i).transpose()).collect();
    let mut rhs: Vec<f64> = base.b.iter().copied().collect();
    let mut fresh: Vec<usize> = (0..rows.len()).collect();

    for iteration in 0..opts.max_iter {
        let mut added = Vec::new();
        for &i in &fresh {
            let mut c = a_cl.transpose() * &rows[i];
            let mut d = rhs[i];
            let norm = c.norm();
            if norm <= 1e-14 {
                // row maps to 0 ≤ d, always satisfied
                continue;
            }
            c /= norm;
            d /= norm;
            let current = stack(&rows, &rhs, n);
            if !is_redundant(&c, d, &current.0, &current.1, opts.tol)? {
                rows.push(c);
                rhs.push(d);
                added.push(rows.len() - 1);
            }
        }
        log::debug!("mpi iteration {iteration}: {} new rows", added.len());
        if added.is_empty() {
            let (a, b) = stack(&rows, &rhs, n);
            return remove_redundant(&Polyhedron::new(a, b)?, opts.tol);
        }
        fresh = added;
    }
    let (a, b) = stack(&rows, &rhs, n);
    Err(Error::PartialInvariantSet {
        iterations: opts.max_iter,
        last: Box::new(Polyhedron::new(a, b)?),
    })
}

fn stack(rows: &[DVector<f64>], rhs: &[f64], n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    (a, DVector::from_column_slice(rhs))
}

/// Whether `cᵀx ≤ d` holds on all of `{A x ≤ b}` (origin assumed feasible).
fn is_redundant(c: &DVector<f64>, d: f64, a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<bool> {
    match lp_minimize(&(-c), a, b, &DVector::zeros(c.len())) {
        Ok(res) => Ok(c.dot(&res.y_star) <= d + tol),
        Err(Error::Unbounded(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Drop rows implied by the others, one LP per row.
pub(crate) fn remove_redundant(p: &Polyhedron, tol: f64) -> Result<Polyhedron> {
    let mut keep: Vec<usize> = (0..p.num_rows()).collect();
    let mut i = 0;
    while i < keep.len() {
        let row = keep[i];
        let others: Vec<usize> = keep.iter().copied().filter(|&r| r != row).collect();
        let sub = p.select_rows(&others);
        let c = p.a.row(row).transpose();
        if !others.is_empty() && is_redundant(&c, p.b[row], &sub.a, &sub.b, tol)? {
            keep.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(p.select_rows(&keep))
}
