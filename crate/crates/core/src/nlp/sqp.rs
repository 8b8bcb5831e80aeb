//! Line-search SQP with an elastic QP subproblem and an ℓ1 merit function.

use nalgebra::{DMatrix, DVector};

use super::qp::{qp_solve_from, QpOptions, QpProblem};
use super::{violation, NlpProblem, SolverResult, SolverStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SqpOptions {
    pub feas_tol: f64,
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Iterations without violation progress before declaring infeasibility.
    pub stall_iter: usize,
}

impl Default for SqpOptions {
    fn default() -> Self {
        SqpOptions {
            feas_tol: crate::FEAS_TOL,
            kkt_tol: 1e-6,
            max_iter: 200,
            max_halvings: 60,
            stall_iter: 5,
        }
    }
}

struct Point {
    y: DVector<f64>,
    cost: f64,
    g: DVector<f64>,
}

impl Point {
    fn merit(&self, rho: f64) -> f64 {
        self.cost + rho * self.g.iter().map(|v| v.max(0.0)).sum::<f64>()
    }
}

fn check_finite(what: &str, y: &DVector<f64>, vals: impl IntoIterator<Item = f64>) -> Result<()> {
    if vals.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: what.to_string(),
            iterate: y.iter().copied().collect(),
        })
    }
}

/// Evaluate a trial point; failures (blow-up, non-finite values) reject it.
fn try_point<P: NlpProblem + ?Sized>(p: &P, y: DVector<f64>) -> Option<Point> {
    let (cost, g) = p.evaluate(&y).ok()?;
    if !cost.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Point { y, cost, g })
}

/// Solve `min J s.t. g ≤ 0` from `y0`.
///
/// With `feasible_start` the returned point is never worse than `y0`: unless
/// the final iterate satisfies the constraints and does not increase the cost,
/// `y0` itself comes back with status `FallbackToStart`.
pub fn sqp_solve<P: NlpProblem + ?Sized>(
    p: &P,
    y0: &DVector<f64>,
    feasible_start: bool,
    opts: &SqpOptions,
) -> Result<SolverResult> {
    sqp_solve_warm(p, y0, feasible_start, opts, None)
}

/// [`sqp_solve`] with an initial quasi-Newton matrix (used only when the
/// problem supplies no Hessian), e.g. the shifted matrix of a previous solve.
pub fn sqp_solve_warm<P: NlpProblem + ?Sized>(
    p: &P,
    y0: &DVector<f64>,
    feasible_start: bool,
    opts: &SqpOptions,
    quasi_newton: Option<DMatrix<f64>>,
) -> Result<SolverResult> {
    let n = p.dim();
    let m = p.num_constraints();
    if y0.len() != n {
        return Err(Error::Dimension(format!(
            "start has length {} but problem has {n} variables",
            y0.len()
        )));
    }
    check_finite("SQP start", y0, y0.iter().copied())?;
    let (cost0, g0) = p.evaluate(y0)?;
    check_finite("cost/constraints at start", y0, std::iter::once(cost0).chain(g0.iter().copied()))?;
    let viol0 = violation(&g0);
    if feasible_start && viol0 > opts.feas_tol {
        return Err(Error::InvalidInput(format!(
            "feasible start violates constraints by {viol0:e}"
        )));
    }

    let mut cur = Point {
        y: y0.clone(),
        cost: cost0,
        g: g0,
    };
    let mut lambda = DVector::<f64>::zeros(m);
    let mut rho = 0.0_f64;
    let mut bfgs: Option<DMatrix<f64>> = quasi_newton.filter(|b| b.nrows() == n && b.ncols() == n);
    // rows active at the start are the first working-set guess
    let mut hint: Vec<usize> = (0..m).filter(|&i| cur.g[i] >= -opts.feas_tol).collect();
    let mut status = SolverStatus::MaxIter;
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;
    let mut best_viol = viol0;
    let mut stalled = 0usize;
    let mut cached: Option<super::Derivatives> = None;
    // Levenberg–Marquardt style damping, relative to the Hessian diagonal
    let mut damping = 0.0_f64;

    log::trace!("sqp start: n={n} m={m} cost={cost0:.6e} viol={viol0:.2e}");

    while iterations < opts.max_iter {
        iterations += 1;
        let der = match cached.take() {
            Some(d) => d,
            None => p.derivatives(&cur.y)?,
        };
        check_finite("cost gradient", &cur.y, der.grad.iter().copied())?;
        check_finite("constraint Jacobian", &cur.y, der.jac.iter().copied())?;
        let h = match &der.hessian {
            Some(h) => h.clone(),
            None => bfgs.get_or_insert_with(|| DMatrix::identity(n, n)).clone(),
        };
        let mut h = regularize(h);
        if damping > 0.0 {
            let scale = (0..n).fold(0.0_f64, |acc, i| acc.max(h[(i, i)].abs())).max(1.0);
            for i in 0..n {
                h[(i, i)] += damping * scale;
            }
        }

        let viol = violation(&cur.g);
        let step = solve_subproblem(&h, &der.grad, &der.jac, &cur.g, opts.feas_tol, &hint)?;
        hint = step.working.clone();
        let d = step.d;
        let lam_qp = step.lambda;

        // optimality test at the current point
        kkt = kkt_measure(&der.grad, &der.jac, &cur.g, &lam_qp);
        if viol <= opts.feas_tol && step.s <= opts.feas_tol && kkt <= opts.kkt_tol * (1.0 + der.grad.amax()) {
            lambda = lam_qp;
            status = SolverStatus::Optimal;
            break;
        }

        // penalty parameter must dominate the multipliers
        let lam_max = lam_qp.amax();
        rho = rho.max(lam_max * 1.1 + 1e-8);

        let g_lin: DVector<f64> = &cur.g + &der.jac * &d;
        let l1 = |v: &DVector<f64>| v.iter().map(|x| x.max(0.0)).sum::<f64>();
        let pred = (der.grad.dot(&d) + rho * (l1(&g_lin) - l1(&cur.g))).min(0.0);
        let phi0 = cur.merit(rho);

        let mut accepted: Option<(Point, f64)> = None;
        let mut alpha = 1.0;
        // curved search path y + αd + α²c, c from a second-order correction
        let mut curve: Option<DVector<f64>> = None;
        for k in 0..=opts.max_halvings {
            let mut trial_y = &cur.y + &d * alpha;
            if let Some(c) = &curve {
                trial_y += c * (alpha * alpha);
            }
            if let Some(trial) = try_point(p, trial_y) {
                if trial.merit(rho) <= phi0 + 1e-4 * alpha * pred {
                    accepted = Some((trial, alpha));
                    break;
                }
                if k == 0 {
                    if let Some(d_hat) = second_order_correction(&h, &der, &d, &trial, opts) {
                        if let Some(soc) = try_point(p, &cur.y + &d_hat) {
                            if soc.merit(rho) <= phi0 + 1e-4 * pred {
                                accepted = Some((soc, 1.0));
                                break;
                            }
                        }
                        curve = Some(d_hat - &d);
                    }
                }
            }
            alpha *= 0.5;
        }

        let Some((next, alpha)) = accepted else {
            log::debug!("sqp: line search failed at iteration {iterations}");
            if viol > opts.feas_tol && step.s > opts.feas_tol {
                status = SolverStatus::Infeasible;
            }
            lambda = lam_qp;
            break;
        };

        if alpha < 0.1 {
            damping = (damping * 10.0).clamp(1e-6, 1e6);
        } else if alpha == 1.0 {
            damping = if damping <= 1e-6 { 0.0 } else { damping * 0.1 };
        }

        if der.hessian.is_none() {
            // quasi-Newton update along the accepted step
            let next_der = p.derivatives(&next.y)?;
            let new_grad_lag = &next_der.grad + next_der.jac.tr_mul(&lam_qp);
            let old_grad_lag = &der.grad + der.jac.tr_mul(&lam_qp);
            let b = bfgs.get_or_insert_with(|| DMatrix::identity(n, n));
            damped_bfgs(b, &(&next.y - &cur.y), &(new_grad_lag - old_grad_lag));
            cached = Some(next_der);
        }

        log::trace!(
            "sqp it {iterations}: cost={:.8e} viol={:.2e} kkt={kkt:.2e} alpha={alpha:.3e} s={:.2e}",
            next.cost,
            violation(&next.g),
            step.s
        );

        // infeasibility: linearization stays inconsistent and violation stalls
        let new_viol = violation(&next.g);
        if step.s > opts.feas_tol {
            if new_viol < best_viol * (1.0 - 1e-3) {
                best_viol = new_viol;
                stalled = 0;
            } else {
                stalled += 1;
            }
            if stalled >= opts.stall_iter {
                cur = next;
                lambda = lam_qp;
                status = SolverStatus::Infeasible;
                break;
            }
        } else {
            best_viol = best_viol.min(new_viol);
            stalled = 0;
        }
        let small_step = (&next.y - &cur.y).amax() <= 1e-15 * (1.0 + cur.y.amax());
        cur = next;
        lambda = lam_qp;
        if small_step && violation(&cur.g) <= opts.feas_tol {
            // no measurable progress left
            break;
        }
    }

    let viol = violation(&cur.g);
    if feasible_start {
        let improved = iterations > 0 && viol <= opts.feas_tol && cur.cost <= cost0 + 1e-9;
        let accepted = improved
            && matches!(status, SolverStatus::Optimal | SolverStatus::MaxIter);
        if !accepted {
            return Ok(SolverResult {
                y_star: y0.clone(),
                cost_star: cost0,
                status: SolverStatus::FallbackToStart,
                kkt_residual: kkt,
                constraint_violation: viol0,
                iterations,
                multipliers: lambda,
                certificate: None,
                working_set: vec![],
                quasi_newton: bfgs,
            });
        }
    }
    if status == SolverStatus::MaxIter && viol > opts.feas_tol && iterations >= opts.max_iter {
        log::debug!("sqp: iteration cap with violation {viol:.2e}");
    }
    Ok(SolverResult {
        y_star: cur.y,
        cost_star: cur.cost,
        status,
        kkt_residual: kkt,
        constraint_violation: viol,
        iterations,
        multipliers: lambda,
        certificate: None,
        working_set: hint,
        quasi_newton: bfgs,
    })
}

/// `max(‖∇J + Jᵀλ‖∞, max_i |λ_i g_i|)`
fn kkt_measure(grad: &DVector<f64>, jac: &DMatrix<f64>, g: &DVector<f64>, lam: &DVector<f64>) -> f64 {
    let stat = (grad + jac.tr_mul(lam)).amax();
    let comp = g
        .iter()
        .zip(lam.iter())
        .fold(0.0_f64, |acc, (gi, li)| acc.max((gi * li).abs()));
    stat.max(comp)
}

/// Add `λI`, doubling from 1e-8 (relative), until a Cholesky factor exists.
fn regularize(mut h: DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    h = (&h + h.transpose()) * 0.5;
    let scale = (0..n).fold(0.0_f64, |acc, i| acc.max(h[(i, i)].abs())).max(1.0);
    if strictly_pd(&h) {
        return h;
    }
    let mut lam = 1e-8 * scale;
    loop {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += lam;
        }
        if strictly_pd(&hr) || lam > 1e12 * scale {
            return hr;
        }
        lam *= 2.0;
    }
}

fn strictly_pd(h: &DMatrix<f64>) -> bool {
    let n = h.nrows();
    let scale = (0..n).fold(0.0_f64, |acc, i| acc.max(h[(i, i)].abs()));
    match h.clone().cholesky() {
        Some(ch) => {
            let l = ch.l_dirty();
            (0..n).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * scale)
        }
        None => false,
    }
}

struct Subproblem {
    d: DVector<f64>,
    s: f64,
    lambda: DVector<f64>,
    working: Vec<usize>,
}

/// Elastic QP: `min ½dᵀHd + ∇Jᵀd + ρ_e s` s.t. `g + J d ≤ s`, `s ≥ 0`.
/// Rows violated by at most the feasibility tolerance are linearized as active.
fn solve_subproblem(
    h: &DMatrix<f64>,
    grad: &DVector<f64>,
    jac: &DMatrix<f64>,
    g: &DVector<f64>,
    feas_tol: f64,
    hint: &[usize],
) -> Result<Subproblem> {
    let n = grad.len();
    let m = g.len();
    let viol = violation(g);
    let g_eff: DVector<f64> = if viol <= feas_tol {
        g.map(|v| v.min(0.0))
    } else {
        g.clone()
    };
    let s0 = violation(&g_eff);
    let rho_e = 1e6 * (1.0 + grad.amax());

    let mut hq = DMatrix::zeros(n + 1, n + 1);
    hq.view_mut((0, 0), (n, n)).copy_from(h);
    let mut f = DVector::zeros(n + 1);
    f.rows_mut(0, n).copy_from(grad);
    f[n] = rho_e;
    let mut a = DMatrix::zeros(m + 1, n + 1);
    a.view_mut((0, 0), (m, n)).copy_from(jac);
    for i in 0..m {
        a[(i, n)] = -1.0;
    }
    a[(m, n)] = -1.0;
    let mut b = DVector::zeros(m + 1);
    b.rows_mut(0, m).copy_from(&(-&g_eff));

    let mut start = DVector::zeros(n + 1);
    start[n] = s0;
    let mut hint: Vec<usize> = hint.iter().copied().filter(|&i| i < m).collect();
    if s0 == 0.0 {
        hint.insert(0, m);
    }
    let qp = QpProblem::new(hq, f).with_inequalities(a, b);
    let res = qp_solve_from(&qp, Some(&start), &hint, &QpOptions::default())?;
    if res.y_star.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "QP subproblem step".into(),
            iterate: res.y_star.iter().copied().collect(),
        });
    }
    let d = res.y_star.rows(0, n).into_owned();
    let s = res.y_star[n].max(0.0);
    let lambda = res.multipliers.rows(0, m).map(|v| v.max(0.0));
    let working = res.working_set.into_iter().filter(|&i| i < m).collect();
    Ok(Subproblem { d, s, lambda, working })
}

/// Correction step `d̂` solving the QP with constraints re-linearized around
/// the trial point: `g(y+d) + J (d̂ − d) ≤ s`.
fn second_order_correction(
    h: &DMatrix<f64>,
    der: &super::Derivatives,
    d: &DVector<f64>,
    trial: &Point,
    opts: &SqpOptions,
) -> Option<DVector<f64>> {
    if violation(&trial.g) <= opts.feas_tol {
        return None;
    }
    let g_shift = &trial.g - &der.jac * d;
    let step = solve_subproblem(h, &der.grad, &der.jac, &g_shift, opts.feas_tol, &[]).ok()?;
    (step.s <= opts.feas_tol).then_some(step.d)
}

/// Powell-damped BFGS update keeping `B` positive definite.
fn damped_bfgs(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if sbs <= 1e-300 {
        return;
    }
    let sy = s.dot(y);
    let r = if sy >= 0.2 * sbs {
        y.clone()
    } else {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    };
    let sr = s.dot(&r);
    if sr <= 1e-300 {
        return;
    }
    b.ger(1.0 / sr, &r, &r, 1.0);
    b.ger(-1.0 / sbs, &bs, &bs, 1.0);
    let sym = (&*b + b.transpose()) * 0.5;
    *b = sym;
}
