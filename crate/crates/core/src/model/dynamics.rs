use nalgebra::{DMatrix, DVector};

use super::params::{CstrParams, RobotParams};

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Dynamics {
    /// `x⁺ = A x + B u`
    Linear { a: DMatrix<f64>, b: DMatrix<f64> },
    /// Classical RK4 over one sample interval split into `substeps` steps.
    Continuous {
        plant: ContinuousPlant,
        dt: f64,
        substeps: usize,
    },
}

impl Dynamics {
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Dynamics::Linear { a, b } => a * x + b * u,
            Dynamics::Continuous { plant, dt, substeps } => {
                let h = dt / *substeps as f64;
                let mut x = x.clone();
                for _ in 0..*substeps {
                    x = rk4(plant, &x, u, h);
                }
                x
            }
        }
    }

    pub fn step_with_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        match self {
            Dynamics::Linear { a, b } => (a * x + b * u, a.clone(), b.clone()),
            Dynamics::Continuous { plant, dt, substeps } => {
                let h = dt / *substeps as f64;
                let n = x.len();
                let mut xs = x.clone();
                let mut sx = DMatrix::identity(n, n);
                let mut su = DMatrix::zeros(n, u.len());
                for _ in 0..*substeps {
                    let (next, ax, au) = rk4_tangent(plant, &xs, u, h);
                    su = &ax * su + au;
                    sx = ax * sx;
                    xs = next;
                }
                (xs, sx, su)
            }
        }
    }
}

fn rk4(p: &ContinuousPlant, x: &DVector<f64>, u: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = p.rhs(x, u);
    let k2 = p.rhs(&(x + &k1 * (0.5 * h)), u);
    let k3 = p.rhs(&(x + &k2 * (0.5 * h)), u);
    let k4 = p.rhs(&(x + &k3 * h), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// RK4 step and its exact derivative (tangent-linear scheme).
fn rk4_tangent(
    p: &ContinuousPlant,
    x: &DVector<f64>,
    u: &DVector<f64>,
    h: f64,
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = x.len();
    let eye = DMatrix::<f64>::identity(n, n);

    let (k1, f1x, f1u) = p.rhs_with_jacobians(x, u);
    let k1x = f1x;
    let k1u = f1u;

    let x2 = x + &k1 * (0.5 * h);
    let (k2, f2x, f2u) = p.rhs_with_jacobians(&x2, u);
    let k2x = &f2x * (&eye + &k1x * (0.5 * h));
    let k2u = &f2x * &k1u * (0.5 * h) + f2u;

    let x3 = x + &k2 * (0.5 * h);
    let (k3, f3x, f3u) = p.rhs_with_jacobians(&x3, u);
    let k3x = &f3x * (&eye + &k2x * (0.5 * h));
    let k3u = &f3x * &k2u * (0.5 * h) + f3u;

    let x4 = x + &k3 * h;
    let (k4, f4x, f4u) = p.rhs_with_jacobians(&x4, u);
    let k4x = &f4x * (&eye + &k3x * h);
    let k4u = &f4x * &k3u * h + f4u;

    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let ax = eye + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    let au = (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);
    (next, ax, au)
}

#[derive(Debug, Clone)]
pub enum ContinuousPlant {
    Robot(RobotParams),
    Cstr(CstrParams),
}

impl ContinuousPlant {
    pub fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            ContinuousPlant::Robot(p) => robot_rhs(p, x, u).0,
            ContinuousPlant::Cstr(p) => cstr_rhs(p, x, u, false).0,
        }
    }

    pub fn rhs_with_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        match self {
            ContinuousPlant::Robot(p) => {
                let (f, jac) = robot_rhs(p, x, u);
                let (fx, fu) = jac.expect("requested");
                (f, fx, fu)
            }
            ContinuousPlant::Cstr(p) => {
                let (f, jac) = cstr_rhs(p, x, u, true);
                let (fx, fu) = jac.expect("requested");
                (f, fx, fu)
            }
        }
    }
}

type Jac = Option<(DMatrix<f64>, DMatrix<f64>)>;

/// Two-link planar arm `B(θ)θ̈ + C(θ,θ̇)θ̇ + g(θ) = u` with state
/// `(θ1, θ2, θ̇1, θ̇2)`; always returns Jacobians.
fn robot_rhs(p: &RobotParams, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, Jac) {
    let c = p.coefficients();
    let (th1, th2, w1, w2) = (x[0], x[1], x[2], x[3]);
    let (s2, c2) = th2.sin_cos();
    let (s1, c1) = th1.sin_cos();
    let (s12, c12) = (th1 + th2).sin_cos();

    let b11 = c.b11_0 + c.b11_c * c2;
    let b12 = c.b12_0 + c.b12_c * c2;
    let b22 = c.b22;
    let det = b11 * b22 - b12 * b12;
    let binv = [[b22 / det, -b12 / det], [-b12 / det, b11 / det]];

    let h = -c.h * s2;
    let cw = [h * (2.0 * w1 * w2 + w2 * w2), -h * w1 * w1];
    let g = [c.g1 * c1 + c.g12 * c12, c.g12 * c12];
    let r = [u[0] - cw[0] - g[0], u[1] - cw[1] - g[1]];
    let acc = [
        binv[0][0] * r[0] + binv[0][1] * r[1],
        binv[1][0] * r[0] + binv[1][1] * r[1],
    ];
    let f = DVector::from_vec(vec![w1, w2, acc[0], acc[1]]);

    // ∂r/∂(θ1, θ2, ω1, ω2) before applying B⁻¹
    let dh = -c.h * c2;
    let dr = [
        [
            c.g1 * s1 + c.g12 * s12,
            -dh * (2.0 * w1 * w2 + w2 * w2) + c.g12 * s12,
            -h * 2.0 * w2,
            -h * (2.0 * w1 + 2.0 * w2),
        ],
        [
            c.g12 * s12,
            dh * w1 * w1 + c.g12 * s12,
            h * 2.0 * w1,
            0.0,
        ],
    ];
    // −(∂B/∂θ2) θ̈
    let db11 = -c.b11_c * s2;
    let db12 = -c.b12_c * s2;
    let extra = [-(db11 * acc[0] + db12 * acc[1]), -(db12 * acc[0])];

    let mut fx = DMatrix::zeros(4, 4);
    fx[(0, 2)] = 1.0;
    fx[(1, 3)] = 1.0;
    for col in 0..4 {
        let mut v = [dr[0][col], dr[1][col]];
        if col == 1 {
            v[0] += extra[0];
            v[1] += extra[1];
        }
        fx[(2, col)] = binv[0][0] * v[0] + binv[0][1] * v[1];
        fx[(3, col)] = binv[1][0] * v[0] + binv[1][1] * v[1];
    }
    let mut fu = DMatrix::zeros(4, 2);
    fu[(2, 0)] = binv[0][0];
    fu[(2, 1)] = binv[0][1];
    fu[(3, 0)] = binv[1][0];
    fu[(3, 1)] = binv[1][1];
    (f, Some((fx, fu)))
}

/// Van de Vusse reactor in scaled coordinates (time in hours).
fn cstr_rhs(p: &CstrParams, xs: &DVector<f64>, us: &DVector<f64>, want_jac: bool) -> (DVector<f64>, Jac) {
    let sx = &p.state_scale;
    let su = &p.input_scale;
    let (ca, cb, t) = (xs[0] / sx[0], xs[1] / sx[1], xs[2] / sx[2]);
    let (u1, u2) = (us[0] / su[0], us[1] / su[1]);

    let tk = t + p.t0;
    let k1 = p.k10 * (-p.e1 / tk).exp();
    let k2 = p.k20 * (-p.e2 / tk).exp();
    let k3 = p.k30 * (-p.e3 / tk).exp();

    let ra = -k1 * ca - 2.0 * k3 * ca * ca;
    let rb = k1 * ca - k2 * cb;
    let heat = -p.delta * (k1 * ca * p.dh_ab + k2 * cb * p.dh_bc + 2.0 * k3 * ca * ca * p.dh_ad);
    let f = [
        ra + (p.c_in - ca) * u1,
        rb - cb * u1,
        heat + p.alpha * (u2 - t) + (p.t_in - t) * u1,
    ];
    let out = DVector::from_fn(3, |i, _| f[i] * sx[i]);
    if !want_jac {
        return (out, None);
    }

    let dk1 = k1 * p.e1 / (tk * tk);
    let dk2 = k2 * p.e2 / (tk * tk);
    let dk3 = k3 * p.e3 / (tk * tk);
    let fx_phys = [
        [-k1 - 4.0 * k3 * ca - u1, 0.0, -dk1 * ca - 2.0 * dk3 * ca * ca],
        [k1, -k2 - u1, dk1 * ca - dk2 * cb],
        [
            -p.delta * (k1 * p.dh_ab + 4.0 * k3 * ca * p.dh_ad),
            -p.delta * k2 * p.dh_bc,
            -p.delta * (dk1 * ca * p.dh_ab + dk2 * cb * p.dh_bc + 2.0 * dk3 * ca * ca * p.dh_ad)
                - p.alpha
                - u1,
        ],
    ];
    let fu_phys = [[p.c_in - ca, 0.0], [-cb, 0.0], [p.t_in - t, p.alpha]];
    let fx = DMatrix::from_fn(3, 3, |i, j| sx[i] * fx_phys[i][j] / sx[j]);
    let fu = DMatrix::from_fn(3, 2, |i, j| sx[i] * fu_phys[i][j] / su[j]);
    (out, Some((fx, fu)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_jacobians(p: &ContinuousPlant, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = x.len();
        let m = u.len();
        let mut fx = DMatrix::zeros(n, n);
        let mut fu = DMatrix::zeros(n, m);
        for j in 0..n {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            fx.set_column(j, &((p.rhs(&xp, u) - p.rhs(&xm, u)) / (2.0 * h)));
        }
        for j in 0..m {
            let h = 1e-6 * (1.0 + u[j].abs());
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            fu.set_column(j, &((p.rhs(x, &up) - p.rhs(x, &um)) / (2.0 * h)));
        }
        (fx, fu)
    }

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / (1.0 + b.amax())
    }

    #[test]
    fn robot_rhs_jacobians_match_differences() {
        let plant = ContinuousPlant::Robot(RobotParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
            let u = DVector::from_fn(2, |_, _| rng.random_range(-500.0..500.0));
            let (_, fx, fu) = plant.rhs_with_jacobians(&x, &u);
            let (ox, ou) = fd_jacobians(&plant, &x, &u);
            assert!(rel_err(&fx, &ox) <= 1e-6, "{fx} vs {ox}");
            assert!(rel_err(&fu, &ou) <= 1e-6);
        }
    }

    #[test]
    fn cstr_rhs_jacobians_match_differences() {
        let plant = ContinuousPlant::Cstr(CstrParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let x = DVector::from_vec(vec![
                rng.random_range(0.5..4.0),
                rng.random_range(0.2..2.0),
                rng.random_range(0.9..1.6),
            ]);
            let u = DVector::from_vec(vec![rng.random_range(0.3..3.5), rng.random_range(1.0..2.0)]);
            let (_, fx, fu) = plant.rhs_with_jacobians(&x, &u);
            let (ox, ou) = fd_jacobians(&plant, &x, &u);
            assert!(rel_err(&fx, &ox) <= 1e-6, "{fx} vs {ox}");
            assert!(rel_err(&fu, &ou) <= 1e-6);
        }
    }

    #[test]
    fn rk4_tangent_matches_differences() {
        let dynamics = Dynamics::Continuous {
            plant: ContinuousPlant::Robot(RobotParams::default()),
            dt: 0.05,
            substeps: 2,
        };
        let x = DVector::from_vec(vec![-1.0, 0.7, 1.2, -0.4]);
        let u = DVector::from_vec(vec![120.0, -80.0]);
        let (_, ax, au) = dynamics.step_with_jacobians(&x, &u);
        for j in 0..4 {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (dynamics.step(&xp, &u) - dynamics.step(&xm, &u)) / (2.0 * h);
            assert!((ax.column(j) - col).amax() <= 1e-7);
        }
        for j in 0..2 {
            let h = 1e-4;
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            let col = (dynamics.step(&x, &up) - dynamics.step(&x, &um)) / (2.0 * h);
            assert!((au.column(j) - col).amax() <= 1e-9);
        }
    }
}
