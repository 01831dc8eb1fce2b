//! Sources of the symmetric coefficient matrices `H_ij(ξ)` and `C_ij(η)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{FlowMapError, Result};
use crate::linalg::Matrix;

/// Supplies a symmetric `2n × 2n` coefficient matrix at a state and its
/// partial derivatives with respect to each state component.
pub trait CoefficientProvider: Send + Sync {
    /// Degrees of freedom; states have length `2n`.
    fn n(&self) -> usize;

    /// The coefficient matrix at `state`. Symmetric bit-for-bit.
    fn eval(&self, state: &[f64]) -> Matrix;

    /// `∂M_ij/∂state[l]`, symmetric.
    fn deriv(&self, state: &[f64], l: usize) -> Matrix;

    /// True when the matrix does not depend on the state.
    fn is_constant(&self) -> bool;
}

pub type SharedProvider = Arc<dyn CoefficientProvider>;

fn square_of_order(m: &Matrix, order: usize, context: &'static str) -> Result<()> {
    if m.rows() != order || m.cols() != order {
        return Err(FlowMapError::Dimension {
            context,
            expected: order,
            found: if m.rows() != order {
                m.rows()
            } else {
                m.cols()
            },
        });
    }
    if !m.is_finite() {
        return Err(FlowMapError::NonFinite(context));
    }
    Ok(())
}

fn order_of(m: &Matrix) -> Result<usize> {
    if !m.is_square() || m.rows() == 0 || !m.rows().is_multiple_of(2) {
        return Err(FlowMapError::Dimension {
            context: "coefficient matrix (square, even order)",
            expected: m.rows() + m.rows() % 2,
            found: m.cols(),
        });
    }
    Ok(m.rows())
}

/// State-independent coefficients.
#[derive(Debug, Clone)]
pub struct ConstantCoefficients {
    matrix: Matrix,
}

impl ConstantCoefficients {
    /// Stores the symmetric part of `matrix`.
    pub fn new(matrix: &Matrix) -> Result<Self> {
        let order = order_of(matrix)?;
        square_of_order(matrix, order, "constant coefficients")?;
        Ok(ConstantCoefficients {
            matrix: matrix.symmetrized(),
        })
    }

    pub fn shared(matrix: &Matrix) -> Result<SharedProvider> {
        Ok(Arc::new(ConstantCoefficients::new(matrix)?))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

impl CoefficientProvider for ConstantCoefficients {
    fn n(&self) -> usize {
        self.matrix.rows() / 2
    }

    fn eval(&self, _state: &[f64]) -> Matrix {
        self.matrix.clone()
    }

    fn deriv(&self, _state: &[f64], _l: usize) -> Matrix {
        Matrix::zeros(self.matrix.rows(), self.matrix.cols())
    }

    fn is_constant(&self) -> bool {
        true
    }
}

/// Coefficients affine in the state, `M(ξ) = M₀ + Σ_l ξ^l M_l`, which make
/// the scalar `½ ξᵀ M(ξ) ξ` a cubic polynomial.
#[derive(Debug, Clone)]
pub struct AffineCoefficients {
    base: Matrix,
    slopes: Vec<Matrix>,
}

impl AffineCoefficients {
    /// `slopes[l]` is the coefficient of `ξ^l`; all matrices are symmetrized.
    pub fn new(base: &Matrix, slopes: &[Matrix]) -> Result<Self> {
        let order = order_of(base)?;
        square_of_order(base, order, "affine coefficient base")?;
        if slopes.len() != order {
            return Err(FlowMapError::Dimension {
                context: "affine coefficient slopes",
                expected: order,
                found: slopes.len(),
            });
        }
        for s in slopes {
            square_of_order(s, order, "affine coefficient slope")?;
        }
        Ok(AffineCoefficients {
            base: base.symmetrized(),
            slopes: slopes.iter().map(Matrix::symmetrized).collect(),
        })
    }

    /// `base` plus a single entry `(i, j)` (and its mirror) varying as
    /// `ξ^l`.
    pub fn single_entry(base: &Matrix, i: usize, j: usize, l: usize) -> Result<Self> {
        let order = order_of(base)?;
        if i >= order || j >= order || l >= order {
            return Err(FlowMapError::Dimension {
                context: "affine coefficient index",
                expected: order,
                found: i.max(j).max(l),
            });
        }
        let mut slopes = vec![Matrix::zeros(order, order); order];
        slopes[l][(i, j)] = 1.0;
        slopes[l][(j, i)] = 1.0;
        AffineCoefficients::new(base, &slopes)
    }
}

impl CoefficientProvider for AffineCoefficients {
    fn n(&self) -> usize {
        self.base.rows() / 2
    }

    fn eval(&self, state: &[f64]) -> Matrix {
        self.slopes
            .iter()
            .zip(state)
            .fold(self.base.clone(), |acc, (slope, &x)| {
                acc.add_scaled(x, slope)
            })
    }

    fn deriv(&self, _state: &[f64], l: usize) -> Matrix {
        self.slopes[l].clone()
    }

    fn is_constant(&self) -> bool {
        self.slopes.iter().all(|s| s.max_abs() == 0.0)
    }
}

type MatrixFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
type DerivFn = Arc<dyn Fn(&[f64], usize) -> Matrix + Send + Sync>;

/// User-supplied coefficients with an analytic derivative. Outputs are
/// symmetrized on every call.
#[derive(Clone)]
pub struct AnalyticCoefficients {
    n: usize,
    eval: MatrixFn,
    deriv: DerivFn,
}

impl AnalyticCoefficients {
    pub fn new(
        n: usize,
        eval: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
        deriv: impl Fn(&[f64], usize) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        AnalyticCoefficients {
            n,
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        }
    }
}

impl CoefficientProvider for AnalyticCoefficients {
    fn n(&self) -> usize {
        self.n
    }

    fn eval(&self, state: &[f64]) -> Matrix {
        (self.eval)(state).symmetrized()
    }

    fn deriv(&self, state: &[f64], l: usize) -> Matrix {
        (self.deriv)(state, l).symmetrized()
    }

    fn is_constant(&self) -> bool {
        false
    }
}

impl fmt::Debug for AnalyticCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticCoefficients")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

/// Coefficients given only as a function of the state; derivatives come
/// from central differences.
#[derive(Clone)]
pub struct FiniteDifferenceCoefficients {
    n: usize,
    step: f64,
    eval: MatrixFn,
}

impl FiniteDifferenceCoefficients {
    pub const DEFAULT_STEP: f64 = 1e-6;

    pub fn new(n: usize, eval: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        FiniteDifferenceCoefficients {
            n,
            step: Self::DEFAULT_STEP,
            eval: Arc::new(eval),
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

impl CoefficientProvider for FiniteDifferenceCoefficients {
    fn n(&self) -> usize {
        self.n
    }

    fn eval(&self, state: &[f64]) -> Matrix {
        (self.eval)(state).symmetrized()
    }

    fn deriv(&self, state: &[f64], l: usize) -> Matrix {
        let mut probe = state.to_vec();
        probe[l] = state[l] + self.step;
        let plus = self.eval(&probe);
        probe[l] = state[l] - self.step;
        let minus = self.eval(&probe);
        (&plus - &minus).scale(0.5 / self.step)
    }

    fn is_constant(&self) -> bool {
        false
    }
}

impl fmt::Debug for FiniteDifferenceCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceCoefficients")
            .field("n", &self.n)
            .field("step", &self.step)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, order: usize) -> Matrix {
        Matrix::from_fn(order, order, |_, _| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        let p = ConstantCoefficients::new(&m).unwrap();
        assert_eq!(
            p.eval(&[0.0, 0.0]).to_rows(),
            vec![vec![1.0, 1.0], vec![1.0, 3.0]]
        );
        assert!(p.is_constant());
        assert_eq!(p.deriv(&[0.0, 0.0], 1), Matrix::zeros(2, 2));
    }

    #[test]
    fn rejects_odd_or_non_finite() {
        assert!(ConstantCoefficients::new(&Matrix::identity(3)).is_err());
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::INFINITY;
        assert!(ConstantCoefficients::new(&m).is_err());
        assert!(AffineCoefficients::new(&Matrix::identity(2), &[Matrix::identity(2)]).is_err());
    }

    #[test]
    fn eval_is_symmetric_at_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let order = 4;
        let base = random_matrix(&mut rng, order);
        let slopes: Vec<_> = (0..order).map(|_| random_matrix(&mut rng, order)).collect();
        let affine = AffineCoefficients::new(&base, &slopes).unwrap();
        let raw = affine.clone();
        let analytic = AnalyticCoefficients::new(
            2,
            move |s| {
                let mut m = raw.eval(s);
                m[(0, 3)] += s[1].sin();
                m
            },
            |_, _| Matrix::zeros(4, 4),
        );
        let b2 = base.clone();
        let fd = FiniteDifferenceCoefficients::new(2, move |s| b2.scale(1.0 + s[0] * s[0]));
        for _ in 0..100 {
            let state: Vec<f64> = (0..order).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for m in [affine.eval(&state), analytic.eval(&state), fd.eval(&state)] {
                assert!(m.is_symmetric());
            }
        }
    }

    #[test]
    fn finite_difference_derivative_matches_affine() {
        let base = Matrix::from_diagonal(&[2.0, 1.0]);
        let affine = AffineCoefficients::single_entry(&base, 0, 0, 0).unwrap();
        let copy = affine.clone();
        let fd = FiniteDifferenceCoefficients::new(1, move |s| copy.eval(s));
        let state = [0.7, -0.2];
        for l in 0..2 {
            let diff = &fd.deriv(&state, l) - &affine.deriv(&state, l);
            assert!(diff.max_abs() < 1e-8, "l = {l}: {diff:?}");
        }
        assert!(!affine.is_constant());
    }
}
