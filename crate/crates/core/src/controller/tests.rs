use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nlp::NlpProblem;
use crate::numerics::SymMatrix;
use crate::ocp::{cstr_spec, example1_spec, robot_spec, synchrotron_spec};
use crate::subspace::{compute_projectors, Provenance};

fn identity_projector(dim: usize, q: usize) -> Projector {
    compute_projectors(
        &SymMatrix::identity(dim),
        q,
        Provenance {
            kind: Some(crate::subspace::SensitivityKind::Identity),
            seed: 0,
            n_train: 0,
            plant: "test".into(),
            spec_hash: String::new(),
        },
    )
    .unwrap()
}

fn synchrotron_x0s(spec: &OcpSpec, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let set = crate::model::InitialConditionSet::shrunk_state_box(&spec.model, &DVector::zeros(4), 0.8);
    crate::ocp::sample_feasible_states(spec, &set, n, seed, 400, &SqpOptions::default()).unwrap()
}

#[test]
fn equilibrium_hold_is_a_fixed_point() {
    let spec = robot_spec(8).unwrap();
    let u_eq = DVector::from_fn(spec.dim_u(), |i, _| spec.model.u_eq[i % 2]);
    let guess = make_guess(GuessConstructor::ShiftTerminal, &spec, &u_eq, &spec.model.x_eq).unwrap();
    assert_eq!(guess, u_eq);
    let guess = make_guess(GuessConstructor::TurnpikeInsert { l: 4 }, &spec, &u_eq, &spec.model.x_eq).unwrap();
    assert_eq!(guess, u_eq);
}

#[test]
fn turnpike_insert_layout() {
    let spec = cstr_spec(6).unwrap();
    let u = DVector::from_fn(12, |i, _| 0.01 * i as f64);
    let g = make_guess(GuessConstructor::TurnpikeInsert { l: 3 }, &spec, &u, &spec.model.x_eq).unwrap();
    // stages 1, 2 shifted, stage 3 at ū (zero shift), stages 4..6 unchanged
    let expect = [0.02, 0.03, 0.04, 0.05, 0.0, 0.0, 0.06, 0.07, 0.08, 0.09, 0.10, 0.11];
    for (a, b) in g.iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn out_of_box_terminal_feedback_is_a_contract_violation() {
    let mut spec = synchrotron_spec(4).unwrap();
    spec.terminal_feedback = crate::ocp::TerminalFeedback::Constant(spec.model.u_hi.map(|v| 2.0 * v));
    let u = DVector::zeros(spec.dim_u());
    let r = make_guess(GuessConstructor::ShiftTerminal, &spec, &u, &DVector::zeros(4));
    assert!(matches!(r, Err(Error::ConstructorContract(_))));
}

#[test]
fn reduced_start_reproduces_the_guess() {
    let spec = synchrotron_spec(10).unwrap();
    let proj = Projector::random(20, 4, 9, "synchrotron", "").unwrap();
    let u = DVector::from_fn(20, |i, _| 0.01 * (i as f64).sin());
    let w = proj.t2.tr_mul(&u);
    let x = DVector::from_vec(vec![0.1, 0.0, 0.02, 0.0]);
    let prob = build_reduced(&spec, &proj, &x, &w);
    let y = proj.t1.tr_mul(&u).push(1.0);
    assert!((prob.stack(&y) - &u).amax() <= 1e-12);
    // μ = 0 leaves the naive search space
    let y0 = proj.t1.tr_mul(&u).push(0.0);
    let naive = build_naive_reduced(&spec, &proj, &x);
    assert!((prob.stack(&y0) - naive.stack(&proj.t1.tr_mul(&u))).amax() <= 1e-15);
}

#[test]
fn full_dimension_reduced_matches_full_problem() {
    let spec = synchrotron_spec(10).unwrap();
    let proj = Projector::random(20, 20, 4, "synchrotron", "").unwrap();
    let opts = SqpOptions::default();
    for x in synchrotron_x0s(&spec, 3, 4) {
        let full = crate::ocp::solve_ocp(&spec, &x, &opts).unwrap().unwrap();
        let SeedOutcome::Feasible(u0) = feasible_seed(&spec, &x, &opts).unwrap() else { panic!() };
        let prob = build_reduced(&spec, &proj, &x, &DVector::zeros(0));
        assert_eq!(prob.dim(), 20);
        let red = sqp_solve(&prob, &proj.t1.tr_mul(&u0), true, &opts).unwrap();
        let rel = (red.cost_star - full.cost_star).abs() / full.cost_star.abs().max(1e-12);
        assert!(rel <= 1e-6, "{rel}");
        let naive = build_naive_reduced(&spec, &proj, &x);
        let u = DVector::from_fn(20, |i, _| 0.001 * i as f64);
        assert!((naive.evaluate(&proj.t1.tr_mul(&u)).unwrap().0 - spec.condense(&x).cost(&u).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn naive_reduced_example1_is_mostly_infeasible() {
    let spec = example1_spec();
    let proj = identity_projector(5, 1);
    assert_eq!(proj.t1.column(0).into_owned(), DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]));
    let opts = SqpOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut infeasible = 0;
    for _ in 0..10 {
        let x0 = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
        let ctrl = Controller::reduced(spec.clone(), proj.clone(), GuessConstructor::ShiftTerminal).unwrap();
        let st = ctrl.initialize(&x0).unwrap();
        assert!(violation(&spec.condense(&x0).constraints(&st.u_tilde).unwrap()) <= 1e-6);
        if let SeedOutcome::Infeasible { .. } = naive_reduced_feasibility(&spec, &proj, &x0, &opts).unwrap() {
            infeasible += 1;
        }
    }
    assert!(infeasible >= 9, "{infeasible}");
    assert!(matches!(
        naive_reduced_feasibility(&spec, &proj, &DVector::zeros(2), &opts).unwrap(),
        SeedOutcome::Feasible(v) if v == DVector::zeros(1)
    ));
}

#[test]
fn initialize_at_origin_uses_equilibrium_stack() {
    let spec = synchrotron_spec(12).unwrap();
    let proj = Projector::random(24, 6, 1, "synchrotron", "").unwrap();
    let ctrl = Controller::reduced(spec, proj.clone(), GuessConstructor::ShiftTerminal).unwrap();
    let st = ctrl.initialize(&DVector::zeros(4)).unwrap();
    assert_eq!(st.u_tilde, DVector::zeros(24));
    assert!((&st.w_tilde - proj.t2.tr_mul(&st.u_tilde)).amax() <= 1e-12);
}

#[test]
fn step_at_equilibrium_holds_it() {
    let spec = robot_spec(10).unwrap();
    let proj = identity_projector(20, 6);
    let ctrl = Controller::reduced(spec.clone(), proj, GuessConstructor::ShiftTerminal).unwrap();
    let x = spec.model.x_eq.clone();
    let st = ctrl.initialize(&x).unwrap();
    let (out, next) = ctrl.step(&st, &x).unwrap();
    assert!(out.cost.abs() <= 1e-12);
    assert!((&out.applied - &spec.model.u_eq).amax() <= 1e-9);
    assert_eq!(next.k, 1);
}

#[test]
fn synchrotron_loop_keeps_guesses_feasible_and_costs_decreasing() {
    let spec = synchrotron_spec(20).unwrap();
    for (run, x0) in synchrotron_x0s(&spec, 4, 17).into_iter().enumerate() {
        let proj = Projector::random(40, 6, run as u64, "synchrotron", "").unwrap();
        let ctrl = Controller::reduced(spec.clone(), proj.clone(), GuessConstructor::ShiftTerminal).unwrap();
        let mut x = x0;
        let mut st = ctrl.initialize(&x).unwrap();
        for _ in 0..15 {
            let (out, next) = ctrl.step(&st, &x).unwrap();
            assert!(out.guess_violation <= 1e-6);
            assert!(out.cost <= out.cost_guess + 1e-9);
            assert!((&next.w_tilde - proj.t2.tr_mul(&next.u_tilde)).amax() <= 1e-12);
            x = spec.model.step(&x, &out.applied).unwrap();
            st = next;
        }
    }
}

#[test]
fn sabotaged_solver_falls_back_to_guess() {
    let spec = synchrotron_spec(15).unwrap();
    let proj = Projector::random(30, 6, 3, "synchrotron", "").unwrap();
    let mut ctrl = Controller::reduced(spec.clone(), proj, GuessConstructor::ShiftTerminal).unwrap();
    ctrl.opts.max_iter = 0;
    let mut x = synchrotron_x0s(&spec, 1, 5).remove(0);
    let mut st = ctrl.initialize(&x).unwrap();
    for _ in 0..10 {
        let (out, next) = ctrl.step(&st, &x).unwrap();
        assert_eq!(out.mode, StepMode::FallbackGuess);
        let expect = spec.transform.apply(&st.u_tilde.rows(0, 2).into_owned(), &x);
        assert_eq!(out.applied, expect);
        assert!(out.guess_violation <= 1e-6);
        x = spec.model.step(&x, &out.applied).unwrap();
        st = next;
    }
}

#[test]
fn full_order_controller_steps() {
    let spec = synchrotron_spec(10).unwrap();
    let ctrl = Controller::full_order(spec.clone(), GuessConstructor::ShiftTerminal);
    let mut x = synchrotron_x0s(&spec, 1, 6).remove(0);
    let mut st = ctrl.initialize(&x).unwrap();
    let opts = SqpOptions::default();
    for _ in 0..5 {
        let (out, next) = ctrl.step(&st, &x).unwrap();
        let best = crate::ocp::solve_ocp(&spec, &x, &opts).unwrap().unwrap();
        assert!((out.cost - best.cost_star).abs() <= 1e-6 * (1.0 + best.cost_star.abs()));
        x = spec.model.step(&x, &out.applied).unwrap();
        st = next;
    }
}

#[test]
fn cstr_turnpike_guesses_are_nearly_feasible() {
    let spec = cstr_spec(30).unwrap();
    let proj = identity_projector(60, 5);
    let ctor = GuessConstructor::default_for(&spec);
    assert_eq!(ctor, GuessConstructor::TurnpikeInsert { l: 15 });
    let ctrl = Controller::reduced(spec.clone(), proj, ctor).unwrap();
    let mut x = DVector::from_vec(vec![1.5, 1.2, 1.4]);
    let mut st = ctrl.initialize(&x).unwrap();
    for _ in 0..8 {
        let (out, next) = ctrl.step(&st, &x).unwrap();
        assert!(out.guess_violation <= 1e-3);
        assert!(out.cost <= out.cost_guess + 1e-9);
        x = spec.model.step(&x, &out.applied).unwrap();
        st = next;
    }
}

#[test]
fn shifted_matrix_moves_stage_blocks() {
    let b = DMatrix::from_fn(6, 6, |i, j| (10 * i + j) as f64);
    let map = GuessConstructor::ShiftTerminal.stage_map(3);
    let s = shift_stage_matrix(&b, 2, &map);
    assert_eq!(s[(0, 0)], b[(2, 2)]);
    assert_eq!(s[(1, 3)], b[(3, 5)]);
    assert_eq!(s[(4, 5)], 0.0);
    assert_eq!(s[(4, 4)], b.diagonal().sum() / 6.0);
}
