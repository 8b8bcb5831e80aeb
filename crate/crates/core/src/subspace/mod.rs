//! Active subspaces of the decision stack learned from sampled sensitivities.
//!
//! A sensitivity `s(x) ∈ ℝ^{Nm}` is evaluated at sampled states, the
//! covariance `Ĉ = (1/M) Σ_j s_j s_jᵀ` is eigendecomposed and the leading `q`
//! eigenvectors span the active subspace `T1`.

mod projector;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nlp::SqpOptions;
use crate::numerics::SymMatrix;
use crate::ocp::{solve_ocp, OcpSpec};

pub use projector::{compute_projectors, Projector, Provenance, PROJECTOR_VERSION};

/// Norm below which a sensitivity vector counts as uninformative.
pub const NEGLIGIBLE_SENSITIVITY: f64 = 1e-5;

/// Smallest fraction of informative samples before an advisory is raised.
pub const INFORMATIVE_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityKind {
    /// Every sample contributes `I`, so `Ĉ = I` and the tie-break rule picks
    /// the leading stages (move blocking on the first `q` inputs).
    Identity,
    /// `s = u^c*(x)`
    OptimalInput,
    /// `s = ∇_{u^c} J(x, u^c*(x))`
    CostGradient,
}

impl SensitivityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensitivityKind::Identity => "identity",
            SensitivityKind::OptimalInput => "optimal_input",
            SensitivityKind::CostGradient => "cost_gradient",
        }
    }
}

impl std::fmt::Display for SensitivityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SensitivityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(SensitivityKind::Identity),
            "optimal_input" => Ok(SensitivityKind::OptimalInput),
            "cost_gradient" => Ok(SensitivityKind::CostGradient),
            other => Err(Error::Parse(format!("unknown sensitivity kind '{other}'"))),
        }
    }
}

/// Result of evaluating one training sample.
#[derive(Debug, Clone)]
pub enum Sensitivity {
    /// Contributes the identity.
    Identity,
    /// Contributes `s sᵀ`.
    Vector(DVector<f64>),
    /// `𝒫(x)` had no feasible solution; the sample is left out of the mean.
    Skipped,
}

impl Sensitivity {
    /// Outer-product contribution, `None` for a skipped sample.
    pub fn contribution(&self, dim: usize) -> Option<SymMatrix> {
        match self {
            Sensitivity::Identity => Some(SymMatrix::identity(dim)),
            Sensitivity::Vector(s) => SymMatrix::new(s * s.transpose()).ok(),
            Sensitivity::Skipped => None,
        }
    }
}

/// Evaluate `S(x)` for one state. Vectors live in the transformed input
/// coordinates `u^c`.
pub fn eval_sensitivity(kind: SensitivityKind, spec: &OcpSpec, x: &DVector<f64>, opts: &SqpOptions) -> Result<Sensitivity> {
    if kind == SensitivityKind::Identity {
        return Ok(Sensitivity::Identity);
    }
    let Some(sol) = solve_ocp(spec, x, opts)? else {
        log::info!("sensitivity sample at {:?} skipped: infeasible", x.as_slice());
        return Ok(Sensitivity::Skipped);
    };
    match kind {
        SensitivityKind::OptimalInput => Ok(Sensitivity::Vector(sol.y_star)),
        SensitivityKind::CostGradient => Ok(Sensitivity::Vector(spec.condense(x).grad_cost(&sol.y_star)?)),
        SensitivityKind::Identity => unreachable!(),
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub kind: SensitivityKind,
    pub c_hat: SymMatrix,
    /// Samples that entered the mean.
    pub n_samples: usize,
    pub n_skipped: usize,
    /// Raw sensitivity vectors in sample order (empty for the identity kind).
    pub per_sample: Vec<DVector<f64>>,
}

impl CovarianceEstimate {
    /// Mean outer product of the given vectors, summed in order.
    pub fn from_vectors(kind: SensitivityKind, vectors: Vec<DVector<f64>>, n_skipped: usize) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::Estimation("every training sample was skipped".into()));
        };
        let dim = first.len();
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension("sensitivity vectors differ in length".into()));
        }
        let mut sum = DMatrix::zeros(dim, dim);
        for v in &vectors {
            sum.ger(1.0, v, v, 1.0);
        }
        let n = vectors.len();
        Ok(CovarianceEstimate {
            kind,
            c_hat: SymMatrix::new(sum / n as f64)?,
            n_samples: n,
            n_skipped,
            per_sample: vectors,
        })
    }

    pub fn identity(dim: usize, n_samples: usize) -> Self {
        CovarianceEstimate {
            kind: SensitivityKind::Identity,
            c_hat: SymMatrix::identity(dim),
            n_samples,
            n_skipped: 0,
            per_sample: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.c_hat.dim()
    }

    /// Fraction of stored vectors with norm above [`NEGLIGIBLE_SENSITIVITY`].
    pub fn informative_fraction(&self) -> Option<f64> {
        if self.per_sample.is_empty() {
            return None;
        }
        let k = self.per_sample.iter().filter(|s| s.norm() > NEGLIGIBLE_SENSITIVITY).count();
        Some(k as f64 / self.per_sample.len() as f64)
    }

    /// Warning text when most cost-gradient samples are (near) zero, which
    /// happens when constraints are rarely active at the optimum.
    pub fn advisory(&self) -> Option<String> {
        if self.kind != SensitivityKind::CostGradient {
            return None;
        }
        let frac = self.informative_fraction()?;
        (frac < INFORMATIVE_FRACTION).then(|| {
            format!(
                "only {:.0}% of cost-gradient samples exceed {NEGLIGIBLE_SENSITIVITY:e} in norm; \
                 consider the optimal_input kind or augmenting T1 with LQR directions",
                100.0 * frac
            )
        })
    }
}

/// Monte-Carlo covariance over `samples`; infeasible samples are skipped.
pub fn estimate_covariance(
    kind: SensitivityKind,
    spec: &OcpSpec,
    samples: &[DVector<f64>],
    opts: &SqpOptions,
) -> Result<CovarianceEstimate> {
    Ok(estimate_covariances(&[kind], spec, samples, opts)?.remove(0))
}

/// [`estimate_covariance`] for several kinds at once; each sample is solved
/// only once, so the estimates equal the separately computed ones.
pub fn estimate_covariances(
    kinds: &[SensitivityKind],
    spec: &OcpSpec,
    samples: &[DVector<f64>],
    opts: &SqpOptions,
) -> Result<Vec<CovarianceEstimate>> {
    if samples.is_empty() {
        return Err(Error::Estimation("no training samples".into()));
    }
    let solved: Vec<SensitivityKind> = kinds
        .iter()
        .copied()
        .filter(|k| *k != SensitivityKind::Identity)
        .collect();
    let mut vectors: Vec<Vec<DVector<f64>>> = vec![Vec::with_capacity(samples.len()); kinds.len()];
    let mut skipped = 0;
    if !solved.is_empty() {
        for (j, x) in samples.iter().enumerate() {
            match solve_ocp(spec, x, opts)? {
                Some(sol) => {
                    for (i, kind) in kinds.iter().enumerate() {
                        match kind {
                            SensitivityKind::Identity => {}
                            SensitivityKind::OptimalInput => vectors[i].push(sol.y_star.clone()),
                            SensitivityKind::CostGradient => vectors[i].push(spec.condense(x).grad_cost(&sol.y_star)?),
                        }
                    }
                }
                None => {
                    log::info!("sensitivity sample at {:?} skipped: infeasible", x.as_slice());
                    skipped += 1;
                }
            }
            log::debug!("sample {}/{} done", j + 1, samples.len());
        }
        if skipped > 0 {
            log::warn!("{skipped} of {} training samples were infeasible and skipped", samples.len());
        }
    }
    kinds
        .iter()
        .zip(vectors)
        .map(|(&kind, vs)| {
            if kind == SensitivityKind::Identity {
                return Ok(CovarianceEstimate::identity(spec.dim_u(), samples.len()));
            }
            let est = CovarianceEstimate::from_vectors(kind, vs, skipped)?;
            if let Some(msg) = est.advisory() {
                log::warn!("{msg}");
            }
            Ok(est)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Report {
    /// `mean_j ‖T1ᵀ s_j‖²`
    pub active_mass: f64,
    /// `mean_j ‖T2ᵀ s_j‖²`
    pub inactive_mass: f64,
    /// `Σ_{i≤q} σ_i`
    pub sigma_active: f64,
    /// `Σ_{i>q} σ_i`
    pub sigma_inactive: f64,
}

impl Lemma1Report {
    /// Largest relative mismatch between sample masses and eigenvalue sums.
    pub fn relative_gap(&self) -> f64 {
        let total = self.sigma_active.abs() + self.sigma_inactive.abs();
        let scale = total.max(f64::MIN_POSITIVE);
        ((self.active_mass - self.sigma_active).abs() / scale)
            .max((self.inactive_mass - self.sigma_inactive).abs() / scale)
    }
}

/// Mean squared projections of the stored samples onto both subspaces,
/// alongside the matching partial eigenvalue sums.
pub fn lemma1_check(est: &CovarianceEstimate, proj: &Projector) -> Result<Lemma1Report> {
    if est.kind == SensitivityKind::Identity || est.per_sample.is_empty() {
        return Err(Error::UnsupportedKind(format!(
            "{} estimates keep no per-sample vectors",
            est.kind
        )));
    }
    if proj.dim() != est.dim() {
        return Err(Error::Dimension("projector and estimate sizes differ".into()));
    }
    let n = est.per_sample.len() as f64;
    let mut active = 0.0;
    let mut inactive = 0.0;
    for s in &est.per_sample {
        active += proj.t1.tr_mul(s).norm_squared();
        inactive += proj.t2.tr_mul(s).norm_squared();
    }
    let q = proj.q;
    Ok(Lemma1Report {
        active_mass: active / n,
        inactive_mass: inactive / n,
        sigma_active: proj.sigma.rows(0, q).sum(),
        sigma_inactive: proj.sigma.rows(q, proj.dim() - q).sum(),
    })
}

/// Share of the spectrum captured by the first `q` eigenvalues.
pub fn cumulative_energy(sigma: &DVector<f64>, q: usize) -> f64 {
    let total: f64 = sigma.iter().map(|s| s.max(0.0)).sum();
    if total == 0.0 {
        return 1.0;
    }
    sigma.iter().take(q).map(|s| s.max(0.0)).sum::<f64>() / total
}

#[cfg(test)]
mod tests;
