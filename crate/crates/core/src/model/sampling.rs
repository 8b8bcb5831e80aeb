use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DiscreteModel;
use crate::error::{Error, Result};

/// Initial conditions: a box sampled uniformly, a parallelotope
/// `center + Σ t_i g_i` with `t_i` uniform on [−1, 1], or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialConditionSet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Parallelotope { center: Vec<f64>, generators: Vec<Vec<f64>> },
    List(Vec<Vec<f64>>),
}

impl InitialConditionSet {
    /// The state box shrunk about `center` by `margin` (1 keeps it).
    /// Unbounded coordinates stay at `center`.
    pub fn shrunk_state_box(model: &DiscreteModel, center: &DVector<f64>, margin: f64) -> Self {
        let n = model.nx();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let (a, b) = (model.x_lo[i], model.x_hi[i]);
            if a.is_finite() && b.is_finite() {
                lo[i] = center[i] + margin * (a - center[i]);
                hi[i] = center[i] + margin * (b - center[i]);
            } else {
                lo[i] = center[i];
                hi[i] = center[i];
            }
        }
        InitialConditionSet::Box { lo, hi }
    }
}

/// `n` states drawn with a ChaCha8 stream seeded by `seed`. Box sampling is
/// uniform per coordinate; list sampling draws entries uniformly with
/// replacement. Every sample must lie in the model's state box.
pub fn sample_initial_conditions(
    set: &InitialConditionSet,
    model: &DiscreteModel,
    n: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if n == 0 {
        return Err(Error::Config("need at least one initial condition".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<DVector<f64>> = match set {
        InitialConditionSet::Box { lo, hi } => {
            if lo.len() != model.nx() || hi.len() != model.nx() {
                return Err(Error::Dimension("initial-condition box dimension".into()));
            }
            if lo.iter().zip(hi).any(|(a, b)| a.partial_cmp(b).is_none_or(|o| o.is_gt()) || !a.is_finite() || !b.is_finite()) {
                return Err(Error::Config("initial-condition box is empty or unbounded".into()));
            }
            (0..n)
                .map(|_| {
                    DVector::from_fn(lo.len(), |i, _| {
                        if lo[i] == hi[i] {
                            lo[i]
                        } else {
                            rng.random_range(lo[i]..=hi[i])
                        }
                    })
                })
                .collect()
        }
        InitialConditionSet::Parallelotope { center, generators } => {
            if center.len() != model.nx() || generators.iter().any(|g| g.len() != model.nx()) {
                return Err(Error::Dimension("initial-condition parallelotope dimension".into()));
            }
            if generators.is_empty() || center.iter().chain(generators.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::Config("initial-condition parallelotope is degenerate or unbounded".into()));
            }
            (0..n)
                .map(|_| {
                    let mut x = DVector::from_column_slice(center);
                    for g in generators {
                        let t: f64 = rng.random_range(-1.0..=1.0);
                        x += DVector::from_column_slice(g) * t;
                    }
                    x
                })
                .collect()
        }
        InitialConditionSet::List(points) => {
            if points.is_empty() {
                return Err(Error::Config("initial-condition list is empty".into()));
            }
            if points.iter().any(|p| p.len() != model.nx()) {
                return Err(Error::Dimension("initial-condition list entry dimension".into()));
            }
            (0..n)
                .map(|_| DVector::from_column_slice(&points[rng.random_range(0..points.len())]))
                .collect()
        }
    };
    for (j, x) in samples.iter().enumerate() {
        if !model.state_in_box(x, 0.0) {
            return Err(Error::Config(format!(
                "initial condition {j} = {:?} lies outside the state constraints",
                x.as_slice()
            )));
        }
    }
    Ok(samples)
}
