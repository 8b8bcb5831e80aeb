//! Dense primal active-set solver for convex quadratic programs
//!
//! ```text
//! min ½ yᵀ H y + fᵀ y   s.t.   A_in y ≤ b_in,   A_eq y = b_eq
//! ```
//!
//! `H` only has to be positive semi-definite; directions of zero curvature are
//! followed as rays, so linear programs are solved by the same loop. The
//! working set is kept linearly independent and the null-space basis is
//! rebuilt from a Householder factorization at every iteration. Ties in the
//! ratio test go to the smallest row index, and after a run of degenerate
//! (zero-length) steps the drop rule switches to Bland's smallest-index rule.

use nalgebra::{DMatrix, DVector};

use super::{SolverResult, SolverStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, f: DVector<f64>) -> Self {
        let n = f.len();
        QpProblem {
            h,
            f,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, y: &DVector<f64>) -> f64 {
        0.5 * y.dot(&(&self.h * y)) + self.f.dot(y)
    }

    /// Largest violation over inequality rows and absolute equality residuals.
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        if self.a_ineq.nrows() > 0 {
            let r = &self.a_ineq * y - &self.b_ineq;
            v = r.iter().fold(v, |acc, x| acc.max(*x));
        }
        if self.a_eq.nrows() > 0 {
            let r = &self.a_eq * y - &self.b_eq;
            v = r.iter().fold(v, |acc, x| acc.max(x.abs()));
        }
        v
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.h.shape() != (n, n)
            || self.a_ineq.ncols() != n
            || self.a_eq.ncols() != n
            || self.a_ineq.nrows() != self.b_ineq.len()
            || self.a_eq.nrows() != self.b_eq.len()
        {
            return Err(Error::Dimension("inconsistent QP data".into()));
        }
        let finite = self.h.iter().all(|v| v.is_finite())
            && self.f.iter().all(|v| v.is_finite())
            && self.a_ineq.iter().all(|v| v.is_finite())
            && self.b_ineq.iter().all(|v| v.is_finite())
            && self.a_eq.iter().all(|v| v.is_finite())
            && self.b_eq.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                what: "QP data".into(),
                iterate: vec![],
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    pub max_iter: usize,
    /// Primal feasibility tolerance for the start point and phase one.
    pub feas_tol: f64,
    /// Consecutive zero-length steps before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            max_iter: 5000,
            feas_tol: 1e-9,
            degenerate_limit: 8,
        }
    }
}

/// Solve from scratch (phase one from the origin when needed).
pub fn qp_solve(prob: &QpProblem) -> Result<SolverResult> {
    qp_solve_from(prob, None, &[], &QpOptions::default())
}

/// Solve from an optional start point with a working-set hint. Hint rows that
/// are not active at the start or are linearly dependent are ignored.
pub fn qp_solve_from(
    prob: &QpProblem,
    start: Option<&DVector<f64>>,
    hint: &[usize],
    opts: &QpOptions,
) -> Result<SolverResult> {
    prob.validate()?;
    let n = prob.dim();
    let mut y = match start {
        Some(s) if s.len() == n => s.clone(),
        Some(s) => {
            return Err(Error::Dimension(format!(
                "QP start has length {} but problem has {n} variables",
                s.len()
            )))
        }
        None => DVector::zeros(n),
    };

    let mut hint: Vec<usize> = hint.to_vec();
    if prob.violation(&y) > opts.feas_tol {
        match phase_one(prob, &y, opts)? {
            PhaseOne::Feasible(p) => {
                y = p;
                hint.clear();
            }
            PhaseOne::Infeasible { certificate, violation, iterations } => {
                let cost = prob.objective(&y);
                return Ok(SolverResult {
                    y_star: y,
                    cost_star: cost,
                    status: SolverStatus::Infeasible,
                    kkt_residual: f64::INFINITY,
                    constraint_violation: violation,
                    iterations,
                    multipliers: DVector::zeros(prob.a_ineq.nrows() + prob.a_eq.nrows()),
                    certificate: Some(certificate),
                    working_set: vec![],
                    quasi_newton: None,
                });
            }
        }
    }

    let out = active_set(
        &prob.h,
        &prob.f,
        &prob.a_ineq,
        &prob.b_ineq,
        &prob.a_eq,
        y,
        &hint,
        opts,
    )?;
    let lam = out.multipliers(prob.a_ineq.nrows(), prob.a_eq.nrows());
    let kkt = kkt_residual(prob, &out.y, &lam);
    let viol = prob.violation(&out.y);
    Ok(SolverResult {
        cost_star: prob.objective(&out.y),
        y_star: out.y,
        status: if out.converged {
            SolverStatus::Optimal
        } else {
            SolverStatus::MaxIter
        },
        kkt_residual: kkt,
        constraint_violation: viol,
        iterations: out.iterations,
        multipliers: lam,
        certificate: None,
        working_set: out.working,
        quasi_newton: None,
    })
}

/// Maximize (or minimize) a linear function over a polyhedron from a feasible
/// start; returns the optimizer. Unbounded problems yield an error.
pub fn lp_minimize(
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    start: &DVector<f64>,
) -> Result<SolverResult> {
    let n = c.len();
    let prob = QpProblem::new(DMatrix::zeros(n, n), c.clone()).with_inequalities(a.clone(), b.clone());
    qp_solve_from(&prob, Some(start), &[], &QpOptions::default())
}

/// Stationarity, complementarity and sign residual of a multiplier estimate.
pub fn kkt_residual(prob: &QpProblem, y: &DVector<f64>, lam: &DVector<f64>) -> f64 {
    let m = prob.a_ineq.nrows();
    let p = prob.a_eq.nrows();
    let mut grad = &prob.h * y + &prob.f;
    if m > 0 {
        grad += prob.a_ineq.transpose() * lam.rows(0, m);
    }
    if p > 0 {
        grad += prob.a_eq.transpose() * lam.rows(m, p);
    }
    let mut r = grad.amax();
    if m > 0 {
        let slack = &prob.a_ineq * y - &prob.b_ineq;
        for i in 0..m {
            r = r.max((lam[i] * slack[i]).abs()).max(-lam[i]);
        }
    }
    r
}

struct ActiveSetOutput {
    y: DVector<f64>,
    working: Vec<usize>,
    lam_w: DVector<f64>,
    iterations: usize,
    converged: bool,
}

impl ActiveSetOutput {
    fn multipliers(&self, m: usize, p: usize) -> DVector<f64> {
        let mut lam = DVector::zeros(m + p);
        for k in 0..p {
            lam[m + k] = self.lam_w[k];
        }
        for (k, &i) in self.working.iter().enumerate() {
            lam[i] = self.lam_w[p + k];
        }
        lam
    }
}

/// Null-space data for the active matrix `A_W` (k×n): `A_Wᵀ = Y R`,
/// `Z` spans the null space.
struct NullSpace {
    y: DMatrix<f64>,
    z: DMatrix<f64>,
    r: DMatrix<f64>,
}

/// Householder QR of `m` (n×k, k ≤ n) with the full orthogonal factor.
/// Returns `None` when a column is numerically dependent on its predecessors.
fn householder(m: &DMatrix<f64>) -> Option<NullSpace> {
    let (n, k) = m.shape();
    let mut a = m.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let mut v = DVector::<f64>::zeros(n);
    for j in 0..k {
        let len = n - j;
        let x = a.view((j, j), (len, 1));
        let norm_x = x.norm();
        if norm_x <= 1e-11 * scale {
            return None;
        }
        let alpha = if x[0] >= 0.0 { -norm_x } else { norm_x };
        let mut vj = v.rows_mut(j, len);
        vj.copy_from(&x.column(0));
        vj[0] -= alpha;
        let vnorm = vj.norm();
        if vnorm == 0.0 {
            continue;
        }
        vj /= vnorm;
        let vj = v.rows(j, len).into_owned();
        // A[j.., j..] -= 2 v (vᵀ A[j.., j..])
        let mut block = a.view_mut((j, j), (len, k - j));
        let w = block.tr_mul(&vj);
        block.ger(-2.0, &vj, &w, 1.0);
        // Q[:, j..] -= 2 (Q[:, j..] v) vᵀ
        let mut qb = q.view_mut((0, j), (n, len));
        let u = &qb * &vj;
        qb.ger(-2.0, &u, &vj, 1.0);
    }
    let r = a.view((0, 0), (k, k)).upper_triangle();
    let rmax = (0..k).fold(0.0_f64, |acc, i| acc.max(r[(i, i)].abs()));
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * rmax) {
        return None;
    }
    Some(NullSpace {
        y: q.columns(0, k).into_owned(),
        z: q.columns(k, n - k).into_owned(),
        r,
    })
}

/// Gram–Schmidt step (with one re-orthogonalization); appends the normalized
/// residual and returns `true` when `c` is independent of `basis`.
fn extend_basis(basis: &mut Vec<DVector<f64>>, mut c: DVector<f64>) -> bool {
    let norm0 = c.norm();
    if norm0 == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for b in basis.iter() {
            let k = b.dot(&c);
            c.axpy(-k, b, 1.0);
        }
    }
    let r = c.norm();
    if r <= 1e-9 * norm0 {
        return false;
    }
    basis.push(c / r);
    true
}

fn active_matrix(
    a_ineq: &DMatrix<f64>,
    a_eq: &DMatrix<f64>,
    working: &[usize],
) -> DMatrix<f64> {
    let n = a_ineq.ncols().max(a_eq.ncols());
    let p = a_eq.nrows();
    let k = p + working.len();
    let mut aw = DMatrix::zeros(n, k);
    for i in 0..p {
        aw.set_column(i, &a_eq.row(i).transpose());
    }
    for (c, &i) in working.iter().enumerate() {
        aw.set_column(p + c, &a_ineq.row(i).transpose());
    }
    aw
}

/// Descent direction on the current working set. `Newton` steps end at the
/// equality-constrained minimizer (step length 1); `Ray` directions have zero
/// curvature and unbounded step length.
enum Direction {
    Newton(DVector<f64>),
    Ray(DVector<f64>),
}

fn direction(h: &DMatrix<f64>, g: &DVector<f64>, z: &DMatrix<f64>) -> Direction {
    let nz = z.ncols();
    if nz == 0 {
        return Direction::Newton(DVector::zeros(g.len()));
    }
    let hz = h * z;
    let hr = z.tr_mul(&hz);
    let hr = (&hr + hr.transpose()) * 0.5;
    let gr = z.tr_mul(g);
    let hmax = (0..nz).fold(0.0_f64, |acc, i| acc.max(hr[(i, i)].abs()));

    if let Some(ch) = hr.clone().cholesky() {
        let l = ch.l_dirty();
        let lmin = (0..nz).fold(f64::INFINITY, |acc, i| acc.min(l[(i, i)] * l[(i, i)]));
        if hmax > 0.0 && lmin > 1e-13 * hmax {
            let pr = -ch.solve(&gr);
            return Direction::Newton(z * pr);
        }
    }

    // Semi-definite reduced Hessian: follow zero curvature if it descends,
    // otherwise take the pseudo-inverse Newton step.
    let eig = hr.symmetric_eigen();
    let emax = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    let cut = 1e-11 * emax.max(1e-300);
    let gscale = gr.amax().max(1e-300);
    let mut ray = DVector::zeros(nz);
    let mut newton = DVector::zeros(nz);
    for i in 0..nz {
        let vi = eig.eigenvectors.column(i);
        let c = vi.dot(&gr);
        if eig.eigenvalues[i] <= cut || emax == 0.0 {
            if c.abs() > 1e-12 * gscale.max(1.0) {
                ray.axpy(-c, &vi, 1.0);
            }
        } else {
            newton.axpy(-c / eig.eigenvalues[i], &vi, 1.0);
        }
    }
    if ray.amax() > 0.0 {
        Direction::Ray(z * ray)
    } else {
        Direction::Newton(z * newton)
    }
}

#[allow(clippy::too_many_arguments)]
fn active_set(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    mut y: DVector<f64>,
    hint: &[usize],
    opts: &QpOptions,
) -> Result<ActiveSetOutput> {
    let n = y.len();
    let m = a_ineq.nrows();
    let p = a_eq.nrows();

    let row_norms: Vec<f64> = (0..m).map(|i| a_ineq.row(i).amax()).collect();
    let mut in_ws = vec![false; m];
    let mut working: Vec<usize> = Vec::new();

    // seed the working set with hinted rows active at the start, keeping a
    // row only if it is independent of the rows already chosen
    if !hint.is_empty() {
        let slack = b_ineq - a_ineq * &y;
        let mut candidates: Vec<usize> = hint
            .iter()
            .copied()
            .filter(|&i| i < m && slack[i].abs() <= opts.feas_tol * (1.0 + b_ineq[i].abs()))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for k in 0..p {
            extend_basis(&mut basis, a_eq.row(k).transpose());
        }
        for i in candidates {
            if working.len() + p >= n {
                break;
            }
            if extend_basis(&mut basis, a_ineq.row(i).transpose()) {
                working.push(i);
                in_ws[i] = true;
            }
        }
    }

    let mut degenerate_steps = 0usize;
    let mut bland = false;
    let mut at_minimizer = false;
    let mut lam_w = DVector::zeros(p + working.len());
    let mut last_added: Option<usize> = None;

    for iter in 0..opts.max_iter {
        let aw = active_matrix(a_ineq, a_eq, &working);
        let ns = if aw.ncols() == 0 {
            NullSpace {
                y: DMatrix::zeros(n, 0),
                z: DMatrix::identity(n, n),
                r: DMatrix::zeros(0, 0),
            }
        } else {
            match householder(&aw) {
                Some(ns) => ns,
                None => match last_added.take() {
                    // the cheap independence test let a nearly dependent row
                    // through; drop it and refactorize
                    Some(i) => {
                        working.retain(|&j| j != i);
                        in_ws[i] = false;
                        continue;
                    }
                    None => {
                        return Err(Error::InvalidInput("working set became linearly dependent".into()))
                    }
                },
            }
        };
        last_added = None;
        let g = h * &y + f;
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "QP gradient".into(),
                iterate: y.iter().copied().collect(),
            });
        }

        let step = if at_minimizer {
            None
        } else {
            match direction(h, &g, &ns.z) {
                Direction::Newton(d) => {
                    if d.amax() <= 1e-14 * (1.0 + y.amax()) {
                        None
                    } else {
                        Some((d, 1.0))
                    }
                }
                Direction::Ray(d) => Some((d, f64::INFINITY)),
            }
        };

        let Some((d, alpha_max)) = step else {
            // stationary on the working set: check multiplier signs
            at_minimizer = false;
            let k = aw.ncols();
            lam_w = if k == 0 {
                DVector::zeros(0)
            } else {
                let rhs = -ns.y.tr_mul(&g);
                ns.r.solve_upper_triangular(&rhs).ok_or_else(|| {
                    Error::InvalidInput("singular working-set factor".into())
                })?
            };
            let tol = 1e-10 * (1.0 + g.amax());
            let mut drop: Option<(usize, f64)> = None;
            for (c, &i) in working.iter().enumerate() {
                let l = lam_w[p + c];
                if l < -tol {
                    let better = match drop {
                        None => true,
                        Some((j, lj)) => {
                            if bland {
                                i < working[j]
                            } else {
                                l < lj
                            }
                        }
                    };
                    if better {
                        drop = Some((c, l));
                    }
                }
            }
            match drop {
                None => {
                    return Ok(ActiveSetOutput {
                        y,
                        working,
                        lam_w,
                        iterations: iter,
                        converged: true,
                    })
                }
                Some((c, _)) => {
                    let i = working.remove(c);
                    in_ws[i] = false;
                }
            }
            continue;
        };

        // ratio test
        let ad = a_ineq * &d;
        let ay = a_ineq * &y;
        let dmax = d.amax();
        let mut alpha = alpha_max;
        let mut blocking: Option<usize> = None;
        for i in 0..m {
            if in_ws[i] {
                continue;
            }
            if ad[i] > 1e-12 * row_norms[i].max(1e-300) * dmax {
                let slack = (b_ineq[i] - ay[i]).max(0.0);
                let a_i = slack / ad[i];
                if a_i < alpha {
                    alpha = a_i;
                    blocking = Some(i);
                }
            }
        }
        if !alpha.is_finite() {
            return Err(Error::Unbounded(
                "objective decreases without bound along a feasible ray".into(),
            ));
        }
        y.axpy(alpha, &d, 1.0);

        if alpha == 0.0 {
            degenerate_steps += 1;
            if degenerate_steps >= opts.degenerate_limit {
                bland = true;
            }
        } else {
            degenerate_steps = 0;
            bland = false;
        }

        match blocking {
            Some(i) => {
                // a row lying in the span of the working set cannot restrict
                // the current direction, so such a step counts as unblocked
                let row = a_ineq.row(i).transpose();
                let free = ns.z.tr_mul(&row).norm();
                if working.len() + p < n && free > 1e-9 * row.norm() {
                    working.push(i);
                    in_ws[i] = true;
                    last_added = Some(i);
                }
            }
            None => {
                if alpha_max == 1.0 {
                    at_minimizer = true;
                }
            }
        }
    }

    Ok(ActiveSetOutput {
        y,
        working,
        lam_w,
        iterations: opts.max_iter,
        converged: false,
    })
}

enum PhaseOne {
    Feasible(DVector<f64>),
    Infeasible {
        certificate: DVector<f64>,
        violation: f64,
        iterations: usize,
    },
}

/// Find a feasible point, or a Farkas certificate `(w, ν)` with `w ≥ 0`,
/// `wᵀA_in + νᵀA_eq = 0` and `wᵀb_in + νᵀb_eq < 0`.
fn phase_one(prob: &QpProblem, y0: &DVector<f64>, opts: &QpOptions) -> Result<PhaseOne> {
    let n = prob.dim();
    let m = prob.a_ineq.nrows();
    let p = prob.a_eq.nrows();
    let mut y = y0.clone();

    if p > 0 {
        let et = prob.a_eq.transpose();
        let resid = &prob.b_eq - &prob.a_eq * &y;
        match householder(&et) {
            Some(ns) => {
                let c = ns
                    .r
                    .transpose()
                    .solve_lower_triangular(&resid)
                    .ok_or_else(|| Error::InvalidInput("singular equality factor".into()))?;
                y += &ns.y * c;
            }
            None => {
                // dependent equality rows: least squares through the normal
                // equations with a pseudo-inverse
                let gram = &prob.a_eq * &et;
                let pinv = gram
                    .pseudo_inverse(1e-12)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                y += &et * (pinv * &resid);
            }
        }
        let resid = &prob.b_eq - &prob.a_eq * &y;
        if resid.amax() > opts.feas_tol * (1.0 + prob.b_eq.amax()) {
            let mut cert = DVector::zeros(m + p);
            for k in 0..p {
                cert[m + k] = -resid[k];
            }
            return Ok(PhaseOne::Infeasible {
                certificate: cert,
                violation: resid.amax(),
                iterations: 0,
            });
        }
    }
    if m == 0 {
        return Ok(PhaseOne::Feasible(y));
    }
    let t0 = (&prob.a_ineq * &y - &prob.b_ineq)
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(*v));
    if t0 <= opts.feas_tol {
        return Ok(PhaseOne::Feasible(y));
    }

    // min t  s.t.  A y − t ≤ b,  −t ≤ 0,  A_eq y = b_eq
    let mut a1 = DMatrix::zeros(m + 1, n + 1);
    a1.view_mut((0, 0), (m, n)).copy_from(&prob.a_ineq);
    for i in 0..m {
        a1[(i, n)] = -1.0;
    }
    a1[(m, n)] = -1.0;
    let mut b1 = DVector::zeros(m + 1);
    b1.rows_mut(0, m).copy_from(&prob.b_ineq);
    let mut e1 = DMatrix::zeros(p, n + 1);
    e1.view_mut((0, 0), (p, n)).copy_from(&prob.a_eq);
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let mut z0 = DVector::zeros(n + 1);
    z0.rows_mut(0, n).copy_from(&y);
    z0[n] = t0;
    let out = active_set(
        &DMatrix::zeros(n + 1, n + 1),
        &c,
        &a1,
        &b1,
        &e1,
        z0,
        &[],
        opts,
    )?;
    let t = out.y[n];
    if t <= opts.feas_tol {
        return Ok(PhaseOne::Feasible(out.y.rows(0, n).into_owned()));
    }
    let lam = out.multipliers(m + 1, p);
    let mut cert = DVector::zeros(m + p);
    for i in 0..m {
        cert[i] = lam[i].max(0.0);
    }
    for k in 0..p {
        cert[m + k] = lam[m + 1 + k];
    }
    Ok(PhaseOne::Infeasible {
        certificate: cert,
        violation: t,
        iterations: out.iterations,
    })
}
