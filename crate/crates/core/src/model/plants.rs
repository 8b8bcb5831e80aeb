//! Benchmark plants.

use nalgebra::{DMatrix, DVector};

use super::dynamics::{ContinuousPlant, Dynamics};
use super::params::{CstrParams, RobotParams, SynchrotronParams};
use super::DiscreteModel;
use crate::error::Result;

/// `(A, B)` of the built-in synchrotron parameter file.
pub fn synchrotron_matrices() -> (DMatrix<f64>, DMatrix<f64>) {
    let p = SynchrotronParams::default();
    matrices(&p)
}

fn matrices(p: &SynchrotronParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = p.a.len();
    let m = p.u_max.len();
    (
        DMatrix::from_fn(n, n, |i, j| p.a[i][j]),
        DMatrix::from_fn(n, m, |i, j| p.b[i][j]),
    )
}

pub fn synchrotron() -> DiscreteModel {
    synchrotron_from(&SynchrotronParams::default()).expect("built-in synchrotron model")
}

pub fn synchrotron_from(p: &SynchrotronParams) -> Result<DiscreteModel> {
    let (a, b) = matrices(p);
    let n = a.nrows();
    let m = b.ncols();
    let x_hi = DVector::from_column_slice(&p.x_max);
    let u_hi = DVector::from_column_slice(&p.u_max);
    let model = DiscreteModel {
        name: p.name.clone(),
        dynamics: Dynamics::Linear { a, b },
        x_lo: -&x_hi,
        x_hi,
        u_lo: -&u_hi,
        u_hi,
        x_eq: DVector::zeros(n),
        u_eq: DVector::zeros(m),
        sample_time: p.sample_time,
        state_scale: DVector::from_element(n, 1.0),
        input_scale: DVector::from_element(m, 1.0),
    };
    model.validate()?;
    Ok(model)
}

pub fn robot() -> DiscreteModel {
    robot_from(&RobotParams::default()).expect("built-in robot model")
}

pub fn robot_from(p: &RobotParams) -> Result<DiscreteModel> {
    let inf = f64::INFINITY;
    let v = p.velocity_max;
    let model = DiscreteModel {
        name: p.name.clone(),
        dynamics: Dynamics::Continuous {
            plant: ContinuousPlant::Robot(p.clone()),
            dt: p.sample_time,
            substeps: 1,
        },
        x_lo: DVector::from_vec(vec![-inf, -inf, -v, -v]),
        x_hi: DVector::from_vec(vec![inf, inf, v, v]),
        u_lo: DVector::from_element(2, -p.torque_max),
        u_hi: DVector::from_element(2, p.torque_max),
        x_eq: DVector::from_column_slice(&p.x_eq),
        u_eq: DVector::from_column_slice(&p.u_eq),
        sample_time: p.sample_time,
        state_scale: DVector::from_element(4, 1.0),
        input_scale: DVector::from_element(2, 1.0),
    };
    model.validate()?;
    Ok(model)
}

pub fn cstr() -> DiscreteModel {
    cstr_from(&CstrParams::default()).expect("built-in cstr model")
}

/// Scaled reactor model; bounds are converted from the physical ones.
pub fn cstr_from(p: &CstrParams) -> Result<DiscreteModel> {
    let sx = DVector::from_column_slice(&p.state_scale);
    let su = DVector::from_column_slice(&p.input_scale);
    let scale = |v: &[f64], s: &DVector<f64>| DVector::from_fn(v.len(), |i, _| v[i] * s[i]);
    let model = DiscreteModel {
        name: p.name.clone(),
        dynamics: Dynamics::Continuous {
            plant: ContinuousPlant::Cstr(p.clone()),
            dt: p.sample_time,
            substeps: 1,
        },
        x_lo: scale(&p.x_min, &sx),
        x_hi: scale(&p.x_max, &sx),
        u_lo: scale(&p.u_min, &su),
        u_hi: scale(&p.u_max, &su),
        x_eq: DVector::from_column_slice(&p.x_eq),
        u_eq: DVector::from_column_slice(&p.u_eq),
        sample_time: p.sample_time,
        state_scale: sx,
        input_scale: su,
    };
    model.validate()?;
    Ok(model)
}

/// Unconstrained double integrator with one input, used to show that a
/// one-dimensional input subspace cannot reach a two-dimensional terminal
/// equality.
pub fn example1() -> DiscreteModel {
    let inf = f64::INFINITY;
    DiscreteModel {
        name: "example1".into(),
        dynamics: Dynamics::Linear {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        },
        x_lo: DVector::from_element(2, -inf),
        x_hi: DVector::from_element(2, inf),
        u_lo: DVector::from_element(1, -inf),
        u_hi: DVector::from_element(1, inf),
        x_eq: DVector::zeros(2),
        u_eq: DVector::zeros(1),
        sample_time: 1.0,
        state_scale: DVector::from_element(2, 1.0),
        input_scale: DVector::from_element(1, 1.0),
    }
}
