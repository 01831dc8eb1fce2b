//! Phase-space value types: states, sign-block structure matrices, glue
//! constants, parameter grids and reparameterizations.

use std::fmt;
use std::sync::Arc;

use crate::error::{FlowMapError, Result};
use crate::linalg::{BlockMatrix, Matrix};

/// A point `ξ = (Q¹..Qⁿ, P¹..Pⁿ)` of a `2n`-dimensional phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    n: usize,
    values: Vec<f64>,
}

impl PhaseState {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(FlowMapError::Dimension {
                context: "phase state (even, positive length)",
                expected: values.len() + values.len() % 2,
                found: values.len(),
            });
        }
        if !values.iter().all(|x| x.is_finite()) {
            return Err(FlowMapError::NonFinite("phase state"));
        }
        Ok(PhaseState {
            n: values.len() / 2,
            values,
        })
    }

    pub fn from_parts(q: &[f64], p: &[f64]) -> Result<Self> {
        if q.len() != p.len() {
            return Err(FlowMapError::Dimension {
                context: "phase state momenta",
                expected: q.len(),
                found: p.len(),
            });
        }
        PhaseState::new(q.iter().chain(p).copied().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Coordinate block `Q`.
    pub fn q(&self) -> &[f64] {
        &self.values[..self.n]
    }

    /// Momentum block `P`.
    pub fn p(&self) -> &[f64] {
        &self.values[self.n..]
    }
}

fn check_sign(field: &'static str, value: f64) -> Result<f64> {
    if value == 1.0 || value == -1.0 {
        Ok(value)
    } else {
        Err(FlowMapError::InvalidSign { field, value })
    }
}

/// `[[0, ε_upper·Id], [ε_lower·Id, 0]]`, the structure matrix of a flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignBlockMatrix {
    n: usize,
    eps_upper: f64,
    eps_lower: f64,
}

impl SignBlockMatrix {
    pub fn new(n: usize, eps_upper: f64, eps_lower: f64) -> Result<Self> {
        if n == 0 {
            return Err(FlowMapError::Dimension {
                context: "sign-block matrix",
                expected: 1,
                found: 0,
            });
        }
        Ok(SignBlockMatrix {
            n,
            eps_upper: check_sign("eps_upper", eps_upper)?,
            eps_lower: check_sign("eps_lower", eps_lower)?,
        })
    }

    /// The canonical symplectic form `[[0, Id], [−Id, 0]]`.
    pub fn symplectic(n: usize) -> Self {
        SignBlockMatrix {
            n: n.max(1),
            eps_upper: 1.0,
            eps_lower: -1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps_upper(&self) -> f64 {
        self.eps_upper
    }

    pub fn eps_lower(&self) -> f64 {
        self.eps_lower
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.eps_upper == -self.eps_lower
    }

    pub fn is_symmetric(&self) -> bool {
        self.eps_upper == self.eps_lower
    }

    pub fn assemble(&self) -> BlockMatrix {
        let n = self.n;
        let data = Matrix::from_fn(2 * n, 2 * n, |i, j| {
            if i < n && j == i + n {
                self.eps_upper
            } else if i >= n && i == j + n {
                self.eps_lower
            } else {
                0.0
            }
        });
        BlockMatrix::new(data).expect("2n x 2n with n >= 1")
    }
}

impl SignBlockMatrix {
    /// `self · m`, computed by exact block permutation and sign flips.
    pub fn left_mul(&self, m: &Matrix) -> Matrix {
        let n = self.n;
        assert_eq!(m.rows(), 2 * n, "left_mul dimensions");
        Matrix::from_fn(2 * n, m.cols(), |i, j| {
            if i < n {
                self.eps_upper * m[(i + n, j)]
            } else {
                self.eps_lower * m[(i - n, j)]
            }
        })
    }

    /// `m · self`, computed by exact block permutation and sign flips.
    pub fn right_mul(&self, m: &Matrix) -> Matrix {
        let n = self.n;
        assert_eq!(m.cols(), 2 * n, "right_mul dimensions");
        Matrix::from_fn(m.rows(), 2 * n, |i, j| {
            if j < n {
                self.eps_lower * m[(i, j + n)]
            } else {
                self.eps_upper * m[(i, j - n)]
            }
        })
    }

    /// `self · v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(v.len(), 2 * n, "apply dimensions");
        v[n..]
            .iter()
            .map(|x| self.eps_upper * x)
            .chain(v[..n].iter().map(|x| self.eps_lower * x))
            .collect()
    }
}

pub fn assemble_sign_matrix(s: &SignBlockMatrix) -> BlockMatrix {
    s.assemble()
}

/// The constant blocks `a, b, c, d` and their assembly `K = [[a, d], [b, c]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueConstants {
    k: BlockMatrix,
}

impl GlueConstants {
    pub fn new(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<Self> {
        let k = BlockMatrix::from_blocks(a, d, b, c)?;
        if !k.is_finite() {
            return Err(FlowMapError::NonFinite("glue constants"));
        }
        Ok(GlueConstants { k })
    }

    /// `a = c = Id`, `b = d = 0`.
    pub fn identity(n: usize) -> Self {
        GlueConstants {
            k: BlockMatrix::identity(n),
        }
    }

    pub fn from_assembled(k: BlockMatrix) -> Result<Self> {
        if !k.is_finite() {
            return Err(FlowMapError::NonFinite("glue constants"));
        }
        Ok(GlueConstants { k })
    }

    pub fn n(&self) -> usize {
        self.k.n()
    }

    pub fn k(&self) -> &BlockMatrix {
        &self.k
    }

    pub fn a(&self) -> Matrix {
        self.k.split().0
    }

    pub fn d(&self) -> Matrix {
        self.k.split().1
    }

    pub fn b(&self) -> Matrix {
        self.k.split().2
    }

    pub fn c(&self) -> Matrix {
        self.k.split().3
    }
}

/// Uniform grid `τ_k = τ_start + k·h`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterGrid {
    tau_start: f64,
    tau_end: f64,
    steps: usize,
}

impl ParameterGrid {
    pub fn new(tau_start: f64, tau_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(FlowMapError::InvalidGrid("steps must be at least 1".into()));
        }
        if !(tau_start.is_finite() && tau_end.is_finite()) {
            return Err(FlowMapError::InvalidGrid("endpoints must be finite".into()));
        }
        if tau_end <= tau_start {
            return Err(FlowMapError::InvalidGrid(format!(
                "tau_end ({tau_end}) must exceed tau_start ({tau_start})"
            )));
        }
        Ok(ParameterGrid {
            tau_start,
            tau_end,
            steps,
        })
    }

    pub fn tau_start(&self) -> f64 {
        self.tau_start
    }

    pub fn tau_end(&self) -> f64 {
        self.tau_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.tau_end - self.tau_start) / self.steps as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        self.tau_start + k as f64 * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.point(k)).collect()
    }

    /// Same interval with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        ParameterGrid {
            steps: self.steps * factor.max(1),
            ..*self
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The relation `t(τ)` between the two evolution parameters.
#[derive(Clone)]
pub enum Reparameterization {
    /// `t = α·τ + β`.
    Affine { alpha: f64, beta: f64 },
    Custom {
        t_of_tau: ScalarFn,
        dt_dtau: ScalarFn,
    },
}

impl Reparameterization {
    pub fn identity() -> Self {
        Reparameterization::Affine {
            alpha: 1.0,
            beta: 0.0,
        }
    }

    pub fn affine(alpha: f64, beta: f64) -> Self {
        Reparameterization::Affine { alpha, beta }
    }

    pub fn custom(
        t_of_tau: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dt_dtau: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Reparameterization::Custom {
            t_of_tau: Arc::new(t_of_tau),
            dt_dtau: Arc::new(dt_dtau),
        }
    }

    pub fn t_of_tau(&self, tau: f64) -> f64 {
        match self {
            Reparameterization::Affine { alpha, beta } => alpha * tau + beta,
            Reparameterization::Custom { t_of_tau, .. } => t_of_tau(tau),
        }
    }

    pub fn dt_dtau(&self, tau: f64) -> f64 {
        match self {
            Reparameterization::Affine { alpha, .. } => *alpha,
            Reparameterization::Custom { dt_dtau, .. } => dt_dtau(tau),
        }
    }

    /// Largest gap between `dt_dtau` and a central difference of `t_of_tau`
    /// with the grid step, over all grid points.
    pub fn derivative_mismatch(&self, grid: &ParameterGrid) -> f64 {
        let h = grid.h();
        grid.points()
            .into_iter()
            .map(|tau| {
                let fd = (self.t_of_tau(tau + h) - self.t_of_tau(tau - h)) / (2.0 * h);
                (fd - self.dt_dtau(tau)).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for Reparameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reparameterization::Affine { alpha, beta } => f
                .debug_struct("Affine")
                .field("alpha", alpha)
                .field("beta", beta)
                .finish(),
            Reparameterization::Custom { .. } => f.write_str("Custom"),
        }
    }
}
