use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::ocp::{cstr_spec, synchrotron_spec};

fn provenance() -> Provenance {
    Provenance {
        kind: Some(SensitivityKind::OptimalInput),
        seed: 3,
        n_train: 4,
        plant: "test".into(),
        spec_hash: "00".into(),
    }
}

#[test]
fn identity_kind_gives_identity_covariance() {
    let spec = synchrotron_spec(5).unwrap();
    let xs = vec![DVector::zeros(4), DVector::from_element(4, 0.1)];
    let est = estimate_covariance(SensitivityKind::Identity, &spec, &xs, &SqpOptions::default()).unwrap();
    assert_eq!(est.c_hat, SymMatrix::identity(10));
    assert_eq!(est.n_samples, 2);
    assert!(matches!(
        eval_sensitivity(SensitivityKind::Identity, &spec, &xs[1], &SqpOptions::default()).unwrap(),
        Sensitivity::Identity
    ));
}

#[test]
fn two_unit_samples_give_half_identity() {
    let vs = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])];
    let est = CovarianceEstimate::from_vectors(SensitivityKind::OptimalInput, vs, 0).unwrap();
    assert_eq!(est.c_hat.as_matrix(), &(DMatrix::identity(2, 2) * 0.5));
}

#[test]
fn all_skipped_is_an_error() {
    let r = CovarianceEstimate::from_vectors(SensitivityKind::CostGradient, vec![], 5);
    assert!(matches!(r, Err(Error::Estimation(_))));
}

#[test]
fn full_dimension_leaves_t2_empty() {
    let c = SymMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]))).unwrap();
    let p = compute_projectors(&c, 3, provenance()).unwrap();
    assert_eq!(p.t2.ncols(), 0);
    assert_eq!(p.t1.ncols(), 3);
}

#[test]
fn identity_covariance_selects_leading_canonical_vectors() {
    let p = compute_projectors(&SymMatrix::identity(120), 6, provenance()).unwrap();
    assert_eq!(p.t1, DMatrix::identity(120, 120).columns(0, 6).into_owned());
}

#[test]
fn diagonal_covariance_orders_by_eigenvalue() {
    let c = SymMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 5.0, 0.5]))).unwrap();
    let p = compute_projectors(&c, 2, provenance()).unwrap();
    assert_eq!(p.t1.column(0).into_owned(), DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]));
    assert_eq!(p.t1.column(1).into_owned(), DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]));
}

#[test]
fn q_outside_range_is_rejected() {
    assert!(compute_projectors(&SymMatrix::identity(4), 0, provenance()).is_err());
    assert!(compute_projectors(&SymMatrix::identity(4), 5, provenance()).is_err());
}

#[test]
fn lemma1_refuses_identity_kind() {
    let est = CovarianceEstimate::identity(4, 10);
    let p = compute_projectors(&est.c_hat, 2, provenance()).unwrap();
    assert!(matches!(lemma1_check(&est, &p), Err(Error::UnsupportedKind(_))));
}

#[test]
fn advisory_for_mostly_zero_gradients() {
    let mut vs = vec![DVector::zeros(3); 9];
    vs.push(DVector::from_vec(vec![1.0, 0.0, 0.0]));
    let est = CovarianceEstimate::from_vectors(SensitivityKind::CostGradient, vs.clone(), 0).unwrap();
    assert!(est.advisory().is_some());
    let est = CovarianceEstimate::from_vectors(SensitivityKind::OptimalInput, vs, 0).unwrap();
    assert!(est.advisory().is_none());
}

#[test]
fn energy_fraction() {
    let s = DVector::from_vec(vec![3.0, 1.0, 0.0]);
    assert_eq!(cumulative_energy(&s, 1), 0.75);
    assert_eq!(cumulative_energy(&s, 3), 1.0);
}

#[test]
fn projector_file_round_trips_bit_exactly() {
    let mut rng_vs = Vec::new();
    for j in 0..7 {
        rng_vs.push(DVector::from_fn(9, |i, _| ((i * 7 + j * 3) as f64).sin() / 3.0));
    }
    let est = CovarianceEstimate::from_vectors(SensitivityKind::CostGradient, rng_vs, 0).unwrap();
    let p = compute_projectors(&est.c_hat, 4, provenance()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("proj.json");
    p.save(&path).unwrap();
    let back = Projector::load(&path).unwrap();
    assert_eq!(back, p);
}

#[test]
fn random_projectors_are_seeded_and_orthonormal() {
    let a = Projector::random(30, 5, 11, "x", "h").unwrap();
    let b = Projector::random(30, 5, 11, "x", "h").unwrap();
    let c = Projector::random(30, 5, 12, "x", "h").unwrap();
    assert_eq!(a, b);
    assert_ne!(a.t1, c.t1);
    assert!(a.orthonormality_defect() <= 1e-12);
}

#[test]
fn cost_gradient_vanishes_at_unconstrained_optimum() {
    // small state: no constraint is active at the optimum
    let spec = synchrotron_spec(10).unwrap();
    let x = DVector::from_vec(vec![1e-3, -1e-3, 0.0, 0.0]);
    let Sensitivity::Vector(s) =
        eval_sensitivity(SensitivityKind::CostGradient, &spec, &x, &SqpOptions::default()).unwrap()
    else {
        panic!("expected a vector")
    };
    assert!(s.norm_squared() <= 1e-12, "{}", s.norm());
}

#[test]
fn turnpike_start_has_small_optimal_input() {
    let spec = cstr_spec(100).unwrap();
    let x = spec.model.x_eq.clone();
    let Sensitivity::Vector(s) =
        eval_sensitivity(SensitivityKind::OptimalInput, &spec, &x, &SqpOptions::default()).unwrap()
    else {
        panic!("expected a vector")
    };
    let m = spec.nu();
    // the leaving arc at the end of the horizon is excluded; the residual
    // offset comes from x̄ being rounded to four decimals
    let head = s.rows(0, 40 * m).amax();
    assert!(head <= 2.5e-3, "{head}");
    assert!(s.amax() > 0.1, "leaving arc expected");
}

#[test]
fn covariance_is_seed_deterministic() {
    let spec = synchrotron_spec(8).unwrap();
    let xs: Vec<DVector<f64>> = (0..4)
        .map(|j| DVector::from_fn(4, |i, _| 0.05 * ((i + 2 * j) as f64).cos()))
        .collect();
    let opts = SqpOptions::default();
    let a = estimate_covariance(SensitivityKind::CostGradient, &spec, &xs, &opts).unwrap();
    let b = estimate_covariance(SensitivityKind::CostGradient, &spec, &xs, &opts).unwrap();
    assert_eq!(a.c_hat, b.c_hat);
}

#[test]
fn joint_estimates_match_separate_ones() {
    let spec = synchrotron_spec(8).unwrap();
    let xs: Vec<DVector<f64>> = (0..3)
        .map(|j| DVector::from_fn(4, |i, _| 1e-3 * ((i + 3 * j) as f64).sin()))
        .collect();
    let opts = SqpOptions::default();
    let kinds = [SensitivityKind::CostGradient, SensitivityKind::Identity, SensitivityKind::OptimalInput];
    let joint = estimate_covariances(&kinds, &spec, &xs, &opts).unwrap();
    for (k, est) in kinds.iter().zip(&joint) {
        let alone = estimate_covariance(*k, &spec, &xs, &opts).unwrap();
        assert_eq!(alone.c_hat, est.c_hat);
        assert_eq!(alone.kind, est.kind);
    }
}

fn vectors_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..12).prop_flat_map(|dim| prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), 1..20))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projector_invariants(raw in vectors_strategy(), qfrac in 0.0..1.0f64) {
        let dim = raw[0].len();
        let vs: Vec<DVector<f64>> = raw.into_iter().map(DVector::from_vec).collect();
        let est = CovarianceEstimate::from_vectors(SensitivityKind::CostGradient, vs.clone(), 0).unwrap();
        let q = 1 + ((dim - 1) as f64 * qfrac) as usize;
        let p = compute_projectors(&est.c_hat, q, provenance()).unwrap();

        prop_assert!(p.orthonormality_defect() <= 1e-9);
        prop_assert!(p.reconstruction_error(&est.c_hat) <= 1e-8 * (1.0 + est.c_hat.as_matrix().amax()));
        prop_assert!(p.sigma.iter().all(|s| *s >= -1e-10));
        for w in p.sigma.as_slice().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }

        // the mean is recomputable from the stored vectors
        let again = CovarianceEstimate::from_vectors(SensitivityKind::CostGradient, vs, 0).unwrap();
        prop_assert!(crate::numerics::max_abs(&(again.c_hat.as_matrix() - est.c_hat.as_matrix())) <= 1e-12);

        let rep = lemma1_check(&est, &p).unwrap();
        let tot = rep.sigma_active + rep.sigma_inactive;
        prop_assert!((rep.active_mass - rep.sigma_active).abs() <= 1e-8 * (1e-300 + tot));
        prop_assert!((rep.inactive_mass - rep.sigma_inactive).abs() <= 1e-8 * (1e-300 + tot));
        if q == dim {
            prop_assert_eq!(rep.inactive_mass, 0.0);
        }

        // T1 T1ᵀ u + T2 T2ᵀ u = u
        let u = DVector::from_fn(dim, |i, _| (i as f64).sin());
        let back = &p.t1 * p.t1.tr_mul(&u) + &p.t2 * p.t2.tr_mul(&u);
        prop_assert!((back - u).amax() <= 1e-10);
    }
}
