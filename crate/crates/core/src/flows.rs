//! Fixed-step classical Runge–Kutta integration of the phase-space flows
//! `ξ̇ = I₁ ∇H`, `η̇ = I₂ ∇H̄` and of the matrix systems
//!
//! ```text
//! Ṡ = I₂ Y S
//! Ṙ = −R I₁ Z
//! Ṫ = I₂ Y T − T I₁ Z
//! ```
//!
//! Matrix right-hand sides come in two forms: a dense matrix form and the
//! literal block equations on `n × n` blocks.

use crate::coefficients::gradient_matrix;
use crate::error::{FlowMapError, Result};
use crate::linalg::{BlockMatrix, Matrix};
use crate::phase::{ParameterGrid, PhaseState, SignBlockMatrix};
use crate::provider::CoefficientProvider;

/// Any state or matrix entry beyond this magnitude aborts integration.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Default step for the evolution parameter.
pub const DEFAULT_STEP: f64 = 1e-3;

/// A matrix-valued function of the evolution parameter (e.g. `τ ↦ Y(τ)`).
pub type MatrixField<'a> = dyn Fn(f64) -> Result<Matrix> + Send + Sync + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub grid: ParameterGrid,
    pub samples: Vec<PhaseState>,
}

impl StateTrajectory {
    pub fn last(&self) -> &PhaseState {
        self.samples
            .last()
            .expect("trajectory has at least two samples")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTrajectory {
    pub grid: ParameterGrid,
    pub samples: Vec<BlockMatrix>,
}

impl MatrixTrajectory {
    pub fn last(&self) -> &BlockMatrix {
        self.samples
            .last()
            .expect("trajectory has at least two samples")
    }
}

/// Which right-hand side the matrix integrators evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhsForm {
    /// Dense `2n × 2n` products.
    #[default]
    Matrix,
    /// The four `n × n` block equations.
    Blockwise,
}

trait Rk4State: Sized {
    fn add_scaled(&self, factor: f64, other: &Self) -> Self;
    fn within(&self, limit: f64) -> bool;
}

impl Rk4State for Vec<f64> {
    fn add_scaled(&self, factor: f64, other: &Self) -> Self {
        self.iter()
            .zip(other)
            .map(|(a, b)| a + factor * b)
            .collect()
    }

    fn within(&self, limit: f64) -> bool {
        self.iter().all(|x| x.abs() <= limit)
    }
}

impl Rk4State for Matrix {
    fn add_scaled(&self, factor: f64, other: &Self) -> Self {
        Matrix::add_scaled(self, factor, other)
    }

    fn within(&self, limit: f64) -> bool {
        self.as_slice().iter().all(|x| x.abs() <= limit)
    }
}

/// Integrates `ẋ = f(s, x)` across the given parameter values, one RK4 step
/// per interval. Non-finite values fail the `<=` test and count as divergence.
fn rk4<S: Rk4State>(
    x0: S,
    points: &[f64],
    stage: &'static str,
    rhs: impl Fn(f64, &S) -> Result<S>,
) -> Result<Vec<S>> {
    if !x0.within(DIVERGENCE_LIMIT) {
        return Err(FlowMapError::Divergence {
            stage,
            index: 0,
            tau: points[0],
        });
    }
    let mut out = Vec::with_capacity(points.len());
    out.push(x0);
    for (k, w) in points.windows(2).enumerate() {
        let (s, s_next) = (w[0], w[1]);
        let h = s_next - s;
        let half = s + 0.5 * h;
        let x = &out[k];
        let k1 = rhs(s, x)?;
        let k2 = rhs(half, &x.add_scaled(0.5 * h, &k1))?;
        let k3 = rhs(half, &x.add_scaled(0.5 * h, &k2))?;
        let k4 = rhs(s_next, &x.add_scaled(h, &k3))?;
        let slope = k1
            .add_scaled(2.0, &k2)
            .add_scaled(2.0, &k3)
            .add_scaled(1.0, &k4);
        let next = x.add_scaled(h / 6.0, &slope);
        if !next.within(DIVERGENCE_LIMIT) {
            return Err(FlowMapError::Divergence {
                stage,
                index: k + 1,
                tau: s_next,
            });
        }
        out.push(next);
    }
    Ok(out)
}

fn check_provider(
    provider: &dyn CoefficientProvider,
    sign: &SignBlockMatrix,
    x0: &PhaseState,
) -> Result<()> {
    for (context, found) in [
        ("provider order", provider.n()),
        ("sign matrix order", sign.n()),
    ] {
        if found != x0.n() {
            return Err(FlowMapError::Dimension {
                context,
                expected: x0.n(),
                found,
            });
        }
    }
    Ok(())
}

/// `x' = I ∇(½ xᵀ M(x) x)` sampled at the given parameter values.
pub(crate) fn flow_on_points(
    provider: &dyn CoefficientProvider,
    sign: &SignBlockMatrix,
    x0: &PhaseState,
    points: &[f64],
    stage: &'static str,
) -> Result<Vec<PhaseState>> {
    check_provider(provider, sign, x0)?;
    let samples = rk4(x0.values().to_vec(), points, stage, |_, x| {
        phase_velocity(provider, sign, x, stage)
    })?;
    samples.into_iter().map(PhaseState::new).collect()
}

/// `I · X(x) · x`, the phase velocity of the flow.
pub(crate) fn phase_velocity(
    provider: &dyn CoefficientProvider,
    sign: &SignBlockMatrix,
    x: &[f64],
    context: &'static str,
) -> Result<Vec<f64>> {
    let grad = gradient_matrix(provider, x, context)?.mul_vec(x);
    Ok(sign.apply(&grad))
}

/// `dξ/dt = I₁ ∇H(ξ)` on a grid of the parameter `t`.
pub fn flow_xi(
    provider_h: &dyn CoefficientProvider,
    i1: &SignBlockMatrix,
    xi0: &PhaseState,
    t_grid: &ParameterGrid,
) -> Result<StateTrajectory> {
    let samples = flow_on_points(provider_h, i1, xi0, &t_grid.points(), "xi flow")?;
    Ok(StateTrajectory {
        grid: *t_grid,
        samples,
    })
}

/// `dη/dτ = I₂ ∇H̄(η)` on a grid of `τ`.
pub fn flow_eta(
    provider_c: &dyn CoefficientProvider,
    i2: &SignBlockMatrix,
    eta0: &PhaseState,
    tau_grid: &ParameterGrid,
) -> Result<StateTrajectory> {
    let samples = flow_on_points(provider_c, i2, eta0, &tau_grid.points(), "eta flow")?;
    Ok(StateTrajectory {
        grid: *tau_grid,
        samples,
    })
}

fn field_at(field: &MatrixField<'_>, tau: f64, order: usize, what: &'static str) -> Result<Matrix> {
    let m = field(tau)?;
    if m.rows() != order || m.cols() != order {
        return Err(FlowMapError::Dimension {
            context: what,
            expected: order,
            found: m.rows(),
        });
    }
    if !m.is_finite() {
        return Err(FlowMapError::NonFinite(what));
    }
    Ok(m)
}

fn check_initial(m: &BlockMatrix, sign: &SignBlockMatrix) -> Result<()> {
    if m.n() != sign.n() {
        return Err(FlowMapError::Dimension {
            context: "initial matrix vs sign matrix",
            expected: sign.n(),
            found: m.n(),
        });
    }
    Ok(())
}

fn into_trajectory(grid: &ParameterGrid, samples: Vec<Matrix>) -> Result<MatrixTrajectory> {
    Ok(MatrixTrajectory {
        grid: *grid,
        samples: samples
            .into_iter()
            .map(BlockMatrix::new)
            .collect::<Result<_>>()?,
    })
}

/// `ε·(A₁B₁ + A₂B₂)` with a single running sum per entry.
fn signed_pair(eps: f64, a1: &Matrix, b1: &Matrix, a2: &Matrix, b2: &Matrix) -> Matrix {
    let mut acc = Matrix::zeros(a1.rows(), b1.cols());
    acc.mul_acc(a1, b1);
    acc.mul_acc(a2, b2);
    acc.scale(eps)
}

fn assemble(blocks: [Matrix; 4]) -> Matrix {
    let [b1, b2, b3, b4] = blocks;
    BlockMatrix::from_blocks(&b1, &b2, &b3, &b4)
        .expect("blocks share one order")
        .into_matrix()
}

/// Left generator term `I₂ Y M`.
fn left_term(form: RhsForm, i2: &SignBlockMatrix, y: &Matrix, m: &Matrix) -> Matrix {
    match form {
        RhsForm::Matrix => &i2.left_mul(y) * m,
        RhsForm::Blockwise => {
            let (y1, y2, y3, y4) = BlockMatrix::new(y.clone()).expect("even order").split();
            let (m1, m2, m3, m4) = BlockMatrix::new(m.clone()).expect("even order").split();
            let (e3, e4) = (i2.eps_upper(), i2.eps_lower());
            assemble([
                signed_pair(e3, &y3, &m1, &y4, &m3),
                signed_pair(e3, &y3, &m2, &y4, &m4),
                signed_pair(e4, &y1, &m1, &y2, &m3),
                signed_pair(e4, &y1, &m2, &y2, &m4),
            ])
        }
    }
}

/// Right generator term `M I₁ Z` (enters the equations with a minus sign).
fn right_term(form: RhsForm, i1: &SignBlockMatrix, z: &Matrix, m: &Matrix) -> Matrix {
    match form {
        RhsForm::Matrix => m * &i1.left_mul(z),
        RhsForm::Blockwise => {
            let (z1, z2, z3, z4) = BlockMatrix::new(z.clone()).expect("even order").split();
            let (m1, m2, m3, m4) = BlockMatrix::new(m.clone()).expect("even order").split();
            let (e1, e2) = (i1.eps_upper(), i1.eps_lower());
            let (z1, z2) = (z1.scale(e2), z2.scale(e2));
            let (z3, z4) = (z3.scale(e1), z4.scale(e1));
            assemble([
                signed_pair(1.0, &m1, &z3, &m2, &z1),
                signed_pair(1.0, &m1, &z4, &m2, &z2),
                signed_pair(1.0, &m3, &z3, &m4, &z1),
                signed_pair(1.0, &m3, &z4, &m4, &z2),
            ])
        }
    }
}

/// `dS/dτ = I₂ Y(τ) S` in the default matrix form.
pub fn integrate_s(
    y_field: &MatrixField<'_>,
    i2: &SignBlockMatrix,
    s0: &BlockMatrix,
    tau_grid: &ParameterGrid,
) -> Result<MatrixTrajectory> {
    integrate_s_with(RhsForm::Matrix, y_field, i2, s0, tau_grid)
}

pub fn integrate_s_with(
    form: RhsForm,
    y_field: &MatrixField<'_>,
    i2: &SignBlockMatrix,
    s0: &BlockMatrix,
    tau_grid: &ParameterGrid,
) -> Result<MatrixTrajectory> {
    check_initial(s0, i2)?;
    let order = 2 * s0.n();
    let samples = rk4(
        s0.as_matrix().clone(),
        &tau_grid.points(),
        "S system",
        |tau, s| {
            let y = field_at(y_field, tau, order, "Y field")?;
            Ok(left_term(form, i2, &y, s))
        },
    )?;
    into_trajectory(tau_grid, samples)
}

/// `dR/dτ = −R I₁ Z(τ)` in the default matrix form.
pub fn integrate_r(
    z_field: &MatrixField<'_>,
    i1: &SignBlockMatrix,
    r0: &BlockMatrix,
    tau_grid: &ParameterGrid,
) -> Result<MatrixTrajectory> {
    integrate_r_with(RhsForm::Matrix, z_field, i1, r0, tau_grid)
}

pub fn integrate_r_with(
    form: RhsForm,
    z_field: &MatrixField<'_>,
    i1: &SignBlockMatrix,
    r0: &BlockMatrix,
    tau_grid: &ParameterGrid,
) -> Result<MatrixTrajectory> {
    check_initial(r0, i1)?;
    let order = 2 * r0.n();
    let samples = rk4(
        r0.as_matrix().clone(),
        &tau_grid.points(),
        "R system",
        |tau, r| {
            let z = field_at(z_field, tau, order, "Z field")?;
            Ok(-&right_term(form, i1, &z, r))
        },
    )?;
    into_trajectory(tau_grid, samples)
}

/// `dT/dτ = I₂ Y T − T I₁ Z`, integrated directly from the block equations.
pub fn integrate_t_direct(
    y_field: &MatrixField<'_>,
    z_field: &MatrixField<'_>,
    i1: &SignBlockMatrix,
    i2: &SignBlockMatrix,
    t0: &BlockMatrix,
    tau_grid: &ParameterGrid,
) -> Result<MatrixTrajectory> {
    integrate_t_direct_with(RhsForm::Blockwise, y_field, z_field, i1, i2, t0, tau_grid)
}

pub fn integrate_t_direct_with(
    form: RhsForm,
    y_field: &MatrixField<'_>,
    z_field: &MatrixField<'_>,
    i1: &SignBlockMatrix,
    i2: &SignBlockMatrix,
    t0: &BlockMatrix,
    tau_grid: &ParameterGrid,
) -> Result<MatrixTrajectory> {
    check_initial(t0, i1)?;
    check_initial(t0, i2)?;
    let order = 2 * t0.n();
    let samples = rk4(
        t0.as_matrix().clone(),
        &tau_grid.points(),
        "T system",
        |tau, t| {
            let y = field_at(y_field, tau, order, "Y field")?;
            let z = field_at(z_field, tau, order, "Z field")?;
            Ok(&left_term(form, i2, &y, t) - &right_term(form, i1, &z, t))
        },
    )?;
    into_trajectory(tau_grid, samples)
}

/// `I₂ Y T − T I₁ Z` for one sample, in the matrix form.
pub fn t_equation_rhs(
    i1: &SignBlockMatrix,
    i2: &SignBlockMatrix,
    y: &Matrix,
    z: &Matrix,
    t: &Matrix,
) -> Matrix {
    &left_term(RhsForm::Matrix, i2, y, t) - &right_term(RhsForm::Matrix, i1, z, t)
}

/// Cubic Hermite interpolation of a sampled trajectory on a uniform grid,
/// using known derivatives at the nodes.
#[derive(Debug, Clone)]
pub struct HermiteInterpolant {
    grid: ParameterGrid,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl HermiteInterpolant {
    pub fn new(grid: ParameterGrid, values: Vec<Vec<f64>>, slopes: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.len() || slopes.len() != grid.len() {
            return Err(FlowMapError::Dimension {
                context: "interpolant samples",
                expected: grid.len(),
                found: values.len().min(slopes.len()),
            });
        }
        Ok(HermiteInterpolant {
            grid,
            values,
            slopes,
        })
    }

    pub fn eval(&self, tau: f64) -> Vec<f64> {
        let h = self.grid.h();
        let pos = (tau - self.grid.tau_start()) / h;
        let seg = (pos.floor().max(0.0) as usize).min(self.grid.steps() - 1);
        let left = self.grid.point(seg);
        let width = self.grid.point(seg + 1) - left;
        let s = (tau - left) / width;
        if s == 0.0 {
            return self.values[seg].clone();
        }
        if s == 1.0 {
            return self.values[seg + 1].clone();
        }
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (y0, y1) = (&self.values[seg], &self.values[seg + 1]);
        let (d0, d1) = (&self.slopes[seg], &self.slopes[seg + 1]);
        (0..y0.len())
            .map(|i| h00 * y0[i] + h10 * width * d0[i] + h01 * y1[i] + h11 * width * d1[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ConstantCoefficients;
    use std::f64::consts::PI;

    fn grid(end: f64, steps: usize) -> ParameterGrid {
        ParameterGrid::new(0.0, end, steps).unwrap()
    }

    fn constant(m: Matrix) -> impl Fn(f64) -> Result<Matrix> + Send + Sync {
        move |_| Ok(m.clone())
    }

    #[test]
    fn zero_field_keeps_state() {
        let p = ConstantCoefficients::new(&Matrix::zeros(2, 2)).unwrap();
        let x0 = PhaseState::new(vec![0.3, -0.7]).unwrap();
        let i1 = SignBlockMatrix::symplectic(1);
        let traj = flow_xi(&p, &i1, &x0, &grid(1.0, 50)).unwrap();
        assert_eq!(traj.samples.len(), 51);
        assert!(traj.samples.iter().all(|s| s == &x0));
        let traj = flow_eta(&p, &i1, &x0, &grid(1.0, 50)).unwrap();
        assert!(traj.samples.iter().all(|s| s == &x0));
    }

    #[test]
    fn rotation_quarter_turn() {
        let p = ConstantCoefficients::new(&Matrix::identity(2)).unwrap();
        let x0 = PhaseState::new(vec![1.0, 0.0]).unwrap();
        let traj = flow_xi(
            &p,
            &SignBlockMatrix::symplectic(1),
            &x0,
            &grid(PI / 2.0, 1571),
        )
        .unwrap();
        assert_eq!(traj.samples[0], x0);
        let end = traj.last().values();
        assert!(
            end[0].abs() < 1e-8 && (end[1] + 1.0).abs() < 1e-8,
            "{end:?}"
        );
    }

    #[test]
    fn zero_generators_fix_matrices() {
        let zero = constant(Matrix::zeros(4, 4));
        let i = SignBlockMatrix::new(2, -1.0, 1.0).unwrap();
        let m0 = BlockMatrix::new(Matrix::from_fn(4, 4, |a, b| (a + 3 * b) as f64)).unwrap();
        let g = grid(2.0, 20);
        for traj in [
            integrate_s(&zero, &i, &m0, &g).unwrap(),
            integrate_r(&zero, &i, &m0, &g).unwrap(),
            integrate_t_direct(&zero, &zero, &i, &i, &m0, &g).unwrap(),
        ] {
            assert!(traj.samples.iter().all(|s| s == &m0));
        }
    }

    #[test]
    fn divergence_is_reported() {
        // Hyperbolic flow e^{10 t} passes 1e12 near t = 2.8.
        let p = ConstantCoefficients::new(&Matrix::identity(2).scale(10.0)).unwrap();
        let x0 = PhaseState::new(vec![1.0, 1.0]).unwrap();
        let i1 = SignBlockMatrix::new(1, 1.0, 1.0).unwrap();
        match flow_xi(&p, &i1, &x0, &grid(5.0, 5000)) {
            Err(FlowMapError::Divergence { stage, index, tau }) => {
                assert_eq!(stage, "xi flow");
                assert!(index > 2700 && index < 2800, "{index}");
                assert!((tau - index as f64 * 1e-3).abs() < 1e-9);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_field_is_an_error() {
        let bad = |_: f64| -> Result<Matrix> { Ok(Matrix::identity(2).scale(f64::NAN)) };
        let err = integrate_s(
            &bad,
            &SignBlockMatrix::symplectic(1),
            &BlockMatrix::identity(1),
            &grid(1.0, 4),
        )
        .unwrap_err();
        assert_eq!(err, FlowMapError::NonFinite("Y field"));
    }

    #[test]
    fn mismatched_dimensions() {
        let p = ConstantCoefficients::new(&Matrix::identity(4)).unwrap();
        let x0 = PhaseState::new(vec![1.0, 0.0]).unwrap();
        assert!(flow_xi(&p, &SignBlockMatrix::symplectic(1), &x0, &grid(1.0, 4)).is_err());
        let id = constant(Matrix::identity(2));
        assert!(integrate_s(
            &id,
            &SignBlockMatrix::symplectic(2),
            &BlockMatrix::identity(1),
            &grid(1.0, 4)
        )
        .is_err());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let g = grid(2.0, 8);
        let f = |t: f64| t * t * t - 2.0 * t + 1.0;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let values = g.points().iter().map(|&t| vec![f(t)]).collect();
        let slopes = g.points().iter().map(|&t| vec![df(t)]).collect();
        let interp = HermiteInterpolant::new(g, values, slopes).unwrap();
        for t in [0.0, 0.1, 0.77, 1.25, 1.999, 2.0] {
            assert!((interp.eval(t)[0] - f(t)).abs() < 1e-12, "t = {t}");
        }
        assert_eq!(interp.eval(0.25)[0], f(0.25));
    }
}
