use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `{x : A x ≤ b}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Polyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "polyhedron has {} rows but {} offsets",
                a.nrows(),
                b.len()
            )));
        }
        for i in 0..a.nrows() {
            if a.row(i).iter().all(|v| *v == 0.0) && b[i] < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "row {i} is 0·x ≤ {} and empties the set",
                    b[i]
                )));
            }
        }
        Ok(Polyhedron { a, b })
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`; rows ordered `x_i ≤ hi_i` then
    /// `−x_i ≤ −lo_i`, coordinates with infinite bounds are skipped.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let n = lo.len();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..n {
            if hi[i].is_finite() {
                let mut r = vec![0.0; n];
                r[i] = 1.0;
                rows.push(r);
                rhs.push(hi[i]);
            }
            if lo[i].is_finite() {
                let mut r = vec![0.0; n];
                r[i] = -1.0;
                rows.push(r);
                rhs.push(-lo[i]);
            }
        }
        Self::from_rows(n, rows, rhs)
    }

    pub fn from_rows(n: usize, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let m = rows.len();
        let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        Self::new(a, DVector::from_vec(rhs))
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    /// Largest row violation `max_i (a_i x − b_i)`, negative inside.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let r = &self.a * x - &self.b;
        r.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v))
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.num_rows() == 0 || self.max_violation(x) <= tol
    }

    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension("intersecting polyhedra of different dimension".into()));
        }
        let m1 = self.num_rows();
        let m2 = other.num_rows();
        let mut a = DMatrix::zeros(m1 + m2, self.dim());
        a.rows_mut(0, m1).copy_from(&self.a);
        a.rows_mut(m1, m2).copy_from(&other.a);
        let mut b = DVector::zeros(m1 + m2);
        b.rows_mut(0, m1).copy_from(&self.b);
        b.rows_mut(m1, m2).copy_from(&other.b);
        Polyhedron::new(a, b)
    }

    /// Rows scaled to unit Euclidean norm (zero rows left untouched).
    pub fn normalized(&self) -> Polyhedron {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for i in 0..a.nrows() {
            let n = a.row(i).norm();
            if n > 0.0 {
                a.row_mut(i).scale_mut(1.0 / n);
                b[i] /= n;
            }
        }
        Polyhedron { a, b }
    }

    /// Keep only the listed rows.
    pub fn select_rows(&self, keep: &[usize]) -> Polyhedron {
        let a = DMatrix::from_fn(keep.len(), self.dim(), |i, j| self.a[(keep[i], j)]);
        let b = DVector::from_fn(keep.len(), |i, _| self.b[keep[i]]);
        Polyhedron { a, b }
    }
}
