//! Example 1: a one-dimensional input subspace cannot meet a two-dimensional
//! terminal equality, while the full problem always can.

use std::fmt::Write as _;

use asnmpc::controller::{naive_reduced_feasibility, solver_options};
use asnmpc::numerics::SymMatrix;
use asnmpc::ocp::{example1_spec, feasible_seed, SeedOutcome};
use asnmpc::subspace::{compute_projectors, Provenance, SensitivityKind};
use asnmpc::Result;
use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct DemoRow {
    pub x0: DVector<f64>,
    pub full_feasible: bool,
    pub naive_feasible: bool,
}

/// `n` seeded nonzero initial states from [−5, 5]², each checked against
/// the full problem and the naive reduced problem with `T1 = e1`.
pub fn demo_infeasible(n: usize, seed: u64) -> Result<Vec<DemoRow>> {
    let spec = example1_spec();
    let proj = compute_projectors(
        &SymMatrix::identity(spec.dim_u()),
        1,
        Provenance {
            kind: Some(SensitivityKind::Identity),
            seed,
            n_train: 0,
            plant: spec.name.clone(),
            spec_hash: spec.fingerprint(),
        },
    )?;
    let opts = solver_options();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let x0 = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
        if x0.amax() == 0.0 {
            continue;
        }
        let full_feasible = matches!(feasible_seed(&spec, &x0, &opts)?, SeedOutcome::Feasible(_));
        let naive_feasible = matches!(naive_reduced_feasibility(&spec, &proj, &x0, &opts)?, SeedOutcome::Feasible(_));
        rows.push(DemoRow {
            x0,
            full_feasible,
            naive_feasible,
        });
    }
    Ok(rows)
}

pub fn demo_table(rows: &[DemoRow]) -> String {
    let mut s = String::from("x0_1,x0_2,full_feasible,naive_reduced_feasible\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.x0[0], r.x0[1], r.full_feasible, r.naive_feasible);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_seeded() {
        let a = demo_infeasible(3, 7).unwrap();
        let b = demo_infeasible(3, 7).unwrap();
        assert_eq!(demo_table(&a), demo_table(&b));
        assert!(a.iter().all(|r| r.full_feasible));
    }
}
