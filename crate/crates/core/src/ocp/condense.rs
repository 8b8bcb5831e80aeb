use nalgebra::{DMatrix, DVector};

use super::{OcpSpec, RowKind, TerminalSet};
use crate::error::{Error, Result};
use crate::nlp::{Derivatives, NlpProblem};

/// Predicted trajectory for one decision stack.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `N + 1` states.
    pub states: Vec<DVector<f64>>,
    /// `N` physical inputs.
    pub inputs: Vec<DVector<f64>>,
    /// Per-stage `∂x⁺/∂x` and `∂x⁺/∂u` (empty unless requested).
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
}

/// `𝒫(x0)` with the states eliminated.
#[derive(Debug, Clone)]
pub struct CondensedOcp<'a> {
    pub spec: &'a OcpSpec,
    pub x0: DVector<f64>,
    layout: Vec<RowKind>,
    tx: DMatrix<f64>,
}

impl<'a> CondensedOcp<'a> {
    pub fn new(spec: &'a OcpSpec, x0: DVector<f64>) -> Self {
        let layout = spec.constraint_layout();
        let tx = spec.transform.state_jacobian(spec.nx(), spec.nu());
        CondensedOcp { spec, x0, layout, tx }
    }

    pub fn dim_u(&self) -> usize {
        self.spec.dim_u()
    }

    pub fn num_constraints(&self) -> usize {
        self.layout.len()
    }

    pub fn layout(&self) -> &[RowKind] {
        &self.layout
    }

    fn check_len(&self, uc: &DVector<f64>) -> Result<()> {
        if uc.len() != self.dim_u() {
            return Err(Error::Dimension(format!(
                "decision stack has length {} but N·m = {}",
                uc.len(),
                self.dim_u()
            )));
        }
        Ok(())
    }

    pub fn simulate(&self, uc: &DVector<f64>, with_jacobians: bool) -> Result<Trajectory> {
        self.check_len(uc)?;
        let spec = self.spec;
        let n_stages = spec.horizon;
        let m = spec.nu();
        let mut states = Vec::with_capacity(n_stages + 1);
        let mut inputs = Vec::with_capacity(n_stages);
        let mut a = Vec::new();
        let mut b = Vec::new();
        states.push(self.x0.clone());
        for i in 0..n_stages {
            let x = &states[i];
            let u = spec.transform.apply(&uc.rows(i * m, m).into_owned(), x);
            let next = if with_jacobians {
                let (next, ai, bi) = spec.model.step_with_jacobians(x, &u).map_err(|e| at_stage(e, i))?;
                a.push(ai);
                b.push(bi);
                next
            } else {
                spec.model.step(x, &u).map_err(|e| at_stage(e, i))?
            };
            inputs.push(u);
            states.push(next);
        }
        Ok(Trajectory { states, inputs, a, b })
    }

    fn cost_of(&self, t: &Trajectory) -> f64 {
        let spec = self.spec;
        let mut j = 0.0;
        for i in 0..spec.horizon {
            j += spec.stage_cost.eval(&t.states[i], &t.inputs[i]);
        }
        j + spec.terminal_cost.eval(&t.states[spec.horizon])
    }

    fn constraints_of(&self, t: &Trajectory) -> DVector<f64> {
        let model = &self.spec.model;
        let n_stages = self.spec.horizon;
        DVector::from_iterator(
            self.layout.len(),
            self.layout.iter().map(|row| match *row {
                RowKind::InputUpper { stage, index } => t.inputs[stage][index] - model.u_hi[index],
                RowKind::InputLower { stage, index } => model.u_lo[index] - t.inputs[stage][index],
                RowKind::StateUpper { stage, index } => t.states[stage][index] - model.x_hi[index],
                RowKind::StateLower { stage, index } => model.x_lo[index] - t.states[stage][index],
                RowKind::TerminalRow { row } => match &self.spec.terminal_set {
                    TerminalSet::Polyhedron(p) => p.a.row(row).transpose().dot(&t.states[n_stages]) - p.b[row],
                    _ => unreachable!("layout and terminal set disagree"),
                },
                RowKind::TerminalUpper { index } => match &self.spec.terminal_set {
                    TerminalSet::Equality(xe) => t.states[n_stages][index] - xe[index],
                    _ => unreachable!("layout and terminal set disagree"),
                },
                RowKind::TerminalLower { index } => match &self.spec.terminal_set {
                    TerminalSet::Equality(xe) => xe[index] - t.states[n_stages][index],
                    _ => unreachable!("layout and terminal set disagree"),
                },
            }),
        )
    }

    pub fn cost(&self, uc: &DVector<f64>) -> Result<f64> {
        let t = self.simulate(uc, false)?;
        Ok(self.cost_of(&t))
    }

    pub fn constraints(&self, uc: &DVector<f64>) -> Result<DVector<f64>> {
        let t = self.simulate(uc, false)?;
        Ok(self.constraints_of(&t))
    }

    /// `(J, g)` from a single rollout.
    pub fn evaluate(&self, uc: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let t = self.simulate(uc, false)?;
        Ok((self.cost_of(&t), self.constraints_of(&t)))
    }

    /// Exact `∇_{u^c} J` by a backward (adjoint) sweep through the rollout.
    pub fn grad_cost(&self, uc: &DVector<f64>) -> Result<DVector<f64>> {
        let t = self.simulate(uc, true)?;
        self.adjoint_gradient(&t)
    }

    fn adjoint_gradient(&self, t: &Trajectory) -> Result<DVector<f64>> {
        let spec = self.spec;
        let n_stages = spec.horizon;
        let m = spec.nu();
        let mut grad = DVector::zeros(self.dim_u());
        let mut lam = spec.terminal_cost.grad(&t.states[n_stages]);
        for i in (0..n_stages).rev() {
            let (lx, lu) = spec.stage_cost.grad(&t.states[i], &t.inputs[i]);
            let bt_lam = t.b[i].tr_mul(&lam);
            let gi = &lu + &bt_lam;
            if gi.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: format!("cost gradient at stage {i}"),
                    iterate: t.inputs[i].iter().copied().collect(),
                });
            }
            grad.rows_mut(i * m, m).copy_from(&gi);
            // λ_i = ℓ_x + T_xᵀ ℓ_u + (A_i + B_i T_x)ᵀ λ_{i+1}
            lam = lx + self.tx.tr_mul(&lu) + t.a[i].tr_mul(&lam) + self.tx.tr_mul(&bt_lam);
        }
        Ok(grad)
    }

    /// Gradient, constraint Jacobian and (for quadratic costs) Gauss–Newton
    /// Hessian with respect to `y`, where `u^c = M y` (`M = I` when `map` is
    /// `None`). Jacobian rows come from forward sensitivities `S_i = ∂x_i/∂y`.
    pub fn derivatives(&self, uc: &DVector<f64>, map: Option<&DMatrix<f64>>) -> Result<Derivatives> {
        let spec = self.spec;
        let n_stages = spec.horizon;
        let n = spec.nx();
        let m = spec.nu();
        let t = self.simulate(uc, true)?;
        let grad_full = self.adjoint_gradient(&t)?;
        let p = map.map_or(self.dim_u(), |mm| mm.ncols());

        // forward sensitivities
        let mut s: Vec<DMatrix<f64>> = Vec::with_capacity(n_stages + 1);
        let mut du: Vec<DMatrix<f64>> = Vec::with_capacity(n_stages);
        s.push(DMatrix::zeros(n, p));
        for i in 0..n_stages {
            let mut ui = &self.tx * &s[i];
            match map {
                Some(mm) => ui += mm.rows(i * m, m),
                None => {
                    for k in 0..m {
                        ui[(k, i * m + k)] += 1.0;
                    }
                }
            }
            let next = &t.a[i] * &s[i] + &t.b[i] * &ui;
            du.push(ui);
            s.push(next);
        }

        let mut jac = DMatrix::zeros(self.layout.len(), p);
        for (r, row) in self.layout.iter().enumerate() {
            match *row {
                RowKind::InputUpper { stage, index } => jac.row_mut(r).copy_from(&du[stage].row(index)),
                RowKind::InputLower { stage, index } => jac.row_mut(r).copy_from(&(-du[stage].row(index))),
                RowKind::StateUpper { stage, index } => jac.row_mut(r).copy_from(&s[stage].row(index)),
                RowKind::StateLower { stage, index } => jac.row_mut(r).copy_from(&(-s[stage].row(index))),
                RowKind::TerminalRow { row } => {
                    if let TerminalSet::Polyhedron(poly) = &spec.terminal_set {
                        jac.row_mut(r).copy_from(&(poly.a.row(row) * &s[n_stages]));
                    }
                }
                RowKind::TerminalUpper { index } => jac.row_mut(r).copy_from(&s[n_stages].row(index)),
                RowKind::TerminalLower { index } => jac.row_mut(r).copy_from(&(-s[n_stages].row(index))),
            }
        }

        let grad = match map {
            Some(mm) => mm.tr_mul(&grad_full),
            None => grad_full,
        };

        let hessian = match &spec.stage_cost {
            super::StageCost::Quadratic { q, r, .. } => {
                let mut h = DMatrix::zeros(p, p);
                for i in 0..n_stages {
                    if i > 0 {
                        let qs = q * &s[i];
                        h.gemm_tr(1.0, &s[i], &qs, 1.0);
                    }
                    let ru = r * &du[i];
                    h.gemm_tr(1.0, &du[i], &ru, 1.0);
                }
                if let super::TerminalCost::Quadratic { p: pf, .. } = &spec.terminal_cost {
                    let ps = pf * &s[n_stages];
                    h.gemm_tr(1.0, &s[n_stages], &ps, 1.0);
                }
                Some((&h + h.transpose()) * 0.5)
            }
            super::StageCost::Economic { .. } => None,
        };
        Ok(Derivatives { grad, jac, hessian })
    }
}

fn at_stage(e: Error, stage: usize) -> Error {
    match e {
        Error::BlowUp { x, u, .. } => Error::BlowUp { stage, x, u },
        other => other,
    }
}

/// The condensed problem as an NLP in `y` with `u^c = M y`.
pub struct OcpProblem<'a> {
    pub ocp: CondensedOcp<'a>,
    pub map: Option<DMatrix<f64>>,
}

impl<'a> OcpProblem<'a> {
    pub fn full(ocp: CondensedOcp<'a>) -> Self {
        OcpProblem { ocp, map: None }
    }

    pub fn mapped(ocp: CondensedOcp<'a>, map: DMatrix<f64>) -> Self {
        OcpProblem { ocp, map: Some(map) }
    }

    pub fn stack(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.map {
            Some(m) => m * y,
            None => y.clone(),
        }
    }
}

impl NlpProblem for OcpProblem<'_> {
    fn dim(&self) -> usize {
        self.map.as_ref().map_or(self.ocp.dim_u(), |m| m.ncols())
    }

    fn num_constraints(&self) -> usize {
        self.ocp.num_constraints()
    }

    fn evaluate(&self, y: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.ocp.evaluate(&self.stack(y))
    }

    fn derivatives(&self, y: &DVector<f64>) -> Result<Derivatives> {
        self.ocp.derivatives(&self.stack(y), self.map.as_ref())
    }
}
