use nalgebra::DMatrix;

use super::max_abs;
use crate::error::{Error, Result};

const SDA_CAP: usize = 200;
const REFINE_CAP: usize = 50;
const RESIDUAL_TOL: f64 = 1e-8;

/// Stabilizing solution of the discrete algebraic Riccati equation together
/// with the optimal state feedback `u = K x` (so `A + B K` is Schur stable).
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub residual: f64,
}

/// `‖P − (Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA)‖∞`
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    match riccati_map(a, b, q, r, p) {
        Some(next) => max_abs(&(p - next)),
        None => f64::INFINITY,
    }
}

fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let at = a.transpose();
    let pb = p * b;
    let s = r + b.transpose() * &pb;
    let gain = s.cholesky()?.solve(&(pb.transpose() * a));
    let next = q + &at * p * a - &at * &pb * gain;
    Some((&next + next.transpose()) * 0.5)
}

/// Solve the DARE with the structure-preserving doubling algorithm, then
/// polish with a few fixed-point sweeps.
pub fn dare_solve(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<RiccatiSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "DARE expects A {n}x{n}, B {n}x{m}, Q {n}x{n}, R {m}x{m}"
        )));
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("R must be positive definite".into()))?;
    let eye = DMatrix::<f64>::identity(n, n);

    let mut ak = a.clone();
    let mut gk = b * r_chol.solve(&b.transpose());
    let mut hk = q.clone();
    let mut converged = false;
    for _ in 0..SDA_CAP {
        let w = (&eye + &gk * &hk).lu();
        let x_a = w
            .solve(&ak)
            .ok_or_else(|| Error::InvalidInput("singular doubling step".into()))?;
        let x_g = w
            .solve(&gk)
            .ok_or_else(|| Error::InvalidInput("singular doubling step".into()))?;
        let a_next = &ak * &x_a;
        let g_next = &gk + &ak * x_g * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &x_a;
        let g_next = (&g_next + g_next.transpose()) * 0.5;
        let h_next = (&h_next + h_next.transpose()) * 0.5;
        let change = max_abs(&(&h_next - &hk));
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if !change.is_finite() {
            break;
        }
        if change <= 1e-15 * max_abs(&hk).max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Divergence {
            what: "Riccati doubling",
            cap: SDA_CAP,
        });
    }

    let mut p = hk;
    let mut residual = dare_residual(a, b, q, r, &p);
    let mut sweeps = 0;
    while residual > RESIDUAL_TOL && sweeps < REFINE_CAP {
        p = riccati_map(a, b, q, r, &p).ok_or_else(|| {
            Error::InvalidInput("R + BᵀPB lost positive definiteness".into())
        })?;
        residual = dare_residual(a, b, q, r, &p);
        sweeps += 1;
    }
    if residual > RESIDUAL_TOL {
        return Err(Error::Divergence {
            what: "Riccati residual refinement",
            cap: REFINE_CAP,
        });
    }

    let pb = &p * b;
    let s = r + b.transpose() * &pb;
    let k = -s
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("R + BᵀPB not positive definite".into()))?
        .solve(&(pb.transpose() * a));
    let rho = spectral_radius(&(a + b * &k));
    if rho >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "Riccati feedback is not stabilizing (spectral radius {rho})"
        )));
    }
    Ok(RiccatiSolution { p, k, residual })
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}
