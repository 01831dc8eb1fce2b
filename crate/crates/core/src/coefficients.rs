//! Coefficient fields `X`, `Y`, `Z` and the quadratic energy.
//!
//! For `H(ξ) = ½ ξᵀ M(ξ) ξ` with symmetric `M`, the matrix
//!
//! ```text
//! X_lj = ½ Σ_i (∂M_ij/∂ξ^l) ξ^i + M_lj
//! ```
//!
//! satisfies `X ξ = ∇H`. It is not symmetric once `M` depends on the state.

use crate::error::{FlowMapError, Result};
use crate::linalg::{BlockMatrix, Matrix};
use crate::phase::{PhaseState, Reparameterization};
use crate::provider::CoefficientProvider;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(BlockMatrix);

impl CoefficientMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        Ok(CoefficientMatrix(BlockMatrix::new(data)?))
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn matrix(&self) -> &Matrix {
        self.0.as_matrix()
    }

    pub fn blocks(&self) -> &BlockMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0.into_matrix()
    }

    /// `data · v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.0.mul_vec(v)
    }

    pub fn scale(&self, factor: f64) -> Self {
        CoefficientMatrix(BlockMatrix::new(self.0.scale(factor)).expect("shape preserved"))
    }
}

fn check_dims(provider: &dyn CoefficientProvider, state: &PhaseState) -> Result<()> {
    if provider.n() != state.n() {
        return Err(FlowMapError::Dimension {
            context: "coefficient provider vs state",
            expected: provider.n(),
            found: state.n(),
        });
    }
    Ok(())
}

/// Shared by `X` and `Y`; the raw-slice form is used on interpolated states.
pub(crate) fn gradient_matrix(
    provider: &dyn CoefficientProvider,
    state: &[f64],
    context: &'static str,
) -> Result<Matrix> {
    let m = provider.eval(state);
    if !m.is_finite() {
        return Err(FlowMapError::NonFinite(context));
    }
    if provider.is_constant() {
        return Ok(m);
    }
    let order = state.len();
    let mut x = m;
    for l in 0..order {
        let d = provider.deriv(state, l);
        for j in 0..order {
            let contraction = (0..order).fold(0.0, |acc, i| acc + d[(i, j)] * state[i]);
            x[(l, j)] += 0.5 * contraction;
        }
    }
    if !x.is_finite() {
        return Err(FlowMapError::NonFinite(context));
    }
    Ok(x)
}

/// `X(ξ)` for the first system.
pub fn compute_x(provider: &dyn CoefficientProvider, xi: &PhaseState) -> Result<CoefficientMatrix> {
    check_dims(provider, xi)?;
    CoefficientMatrix::new(gradient_matrix(provider, xi.values(), "X coefficients")?)
}

/// `Y(η)` for the second system; same construction as [`compute_x`].
pub fn compute_y(
    provider: &dyn CoefficientProvider,
    eta: &PhaseState,
) -> Result<CoefficientMatrix> {
    check_dims(provider, eta)?;
    CoefficientMatrix::new(gradient_matrix(provider, eta.values(), "Y coefficients")?)
}

/// `Z = (dt/dτ) X`.
pub fn compute_z(
    x: &CoefficientMatrix,
    rep: &Reparameterization,
    tau: f64,
) -> Result<CoefficientMatrix> {
    let rate = rep.dt_dtau(tau);
    if !rate.is_finite() {
        return Err(FlowMapError::NonFinite("dt/dtau"));
    }
    Ok(x.scale(rate))
}

/// `½ ξᵀ M(ξ) ξ`.
pub fn energy(provider: &dyn CoefficientProvider, state: &PhaseState) -> Result<f64> {
    check_dims(provider, state)?;
    let v = state.values();
    let mv = provider.eval(v).mul_vec(v);
    let e = 0.5 * v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>();
    if !e.is_finite() {
        return Err(FlowMapError::NonFinite("energy"));
    }
    Ok(e)
}
