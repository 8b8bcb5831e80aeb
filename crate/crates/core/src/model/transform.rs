use nalgebra::{DMatrix, DVector};

/// Re-parameterization of the input as `u = φ(u^c, x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputTransform {
    /// `u = u^c`
    None,
    /// `u = ū + K (x − x̄) + u^c`
    Prestabilize {
        k: DMatrix<f64>,
        x_eq: DVector<f64>,
        u_eq: DVector<f64>,
    },
    /// `u = ū + u^c`
    SteadyShift { u_eq: DVector<f64> },
}

impl InputTransform {
    pub fn apply(&self, u_c: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        match self {
            InputTransform::None => u_c.clone(),
            InputTransform::Prestabilize { k, x_eq, u_eq } => u_eq + k * (x - x_eq) + u_c,
            InputTransform::SteadyShift { u_eq } => u_eq + u_c,
        }
    }

    /// The `u^c` that maps to `u` at state `x`.
    pub fn inverse(&self, u: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        match self {
            InputTransform::None => u.clone(),
            InputTransform::Prestabilize { k, x_eq, u_eq } => u - u_eq - k * (x - x_eq),
            InputTransform::SteadyShift { u_eq } => u - u_eq,
        }
    }

    /// `∂u/∂x`; `∂u/∂u^c` is always the identity.
    pub fn state_jacobian(&self, nx: usize, nu: usize) -> DMatrix<f64> {
        match self {
            InputTransform::Prestabilize { k, .. } => k.clone(),
            _ => DMatrix::zeros(nu, nx),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, InputTransform::None)
    }
}
