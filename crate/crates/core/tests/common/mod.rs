#![allow(dead_code)]

use flowmap::{
    ConstantCoefficients, GlueConstants, MappingProblem, Matrix, ParameterGrid, PhaseState,
    Reparameterization, SignBlockMatrix,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `exp(a)` computed by nalgebra, independent of the crate's integrators.
pub fn expm(a: &Matrix) -> Matrix {
    from_na(&to_na(a).exp())
}

pub fn dense_sign(s: &SignBlockMatrix) -> Matrix {
    s.assemble().into_matrix()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

/// Symmetric positive definite with eigenvalues in `[lo, hi]`: `Q diag Qᵀ`
/// with `Q` from a QR factorization of a random matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Matrix {
    let a = to_na(&random_matrix(rng, dim, dim, 1.0));
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |_, _| {
        rng.gen_range(lo..hi)
    }));
    from_na(&(&q * d * q.transpose())).symmetrized()
}

pub fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

pub fn random_glue(rng: &mut ChaCha8Rng, n: usize) -> GlueConstants {
    // Diagonal shift keeps K comfortably nonsingular.
    let shift = |m: Matrix| &m + &Matrix::identity(n);
    GlueConstants::new(
        &shift(random_matrix(rng, n, n, 0.5)),
        &random_matrix(rng, n, n, 0.5),
        &shift(random_matrix(rng, n, n, 0.5)),
        &random_matrix(rng, n, n, 0.5),
    )
    .unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> PhaseState {
    PhaseState::new((0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Random constant-coefficient problem on `τ ∈ [0, 5]`, `h = 1e-3`.
pub fn random_problem(
    rng: &mut ChaCha8Rng,
    n: usize,
    i1: SignBlockMatrix,
    i2: SignBlockMatrix,
    reparam: Reparameterization,
) -> MappingProblem {
    let h = random_spd(rng, 2 * n, 0.25, 1.0);
    let c = random_spd(rng, 2 * n, 0.25, 1.0);
    MappingProblem::new(
        ConstantCoefficients::shared(&h).unwrap(),
        ConstantCoefficients::shared(&c).unwrap(),
        i1,
        i2,
        reparam,
        random_glue(rng, n),
        random_state(rng, n),
        ParameterGrid::new(0.0, 5.0, 5000).unwrap(),
    )
    .unwrap()
}

/// Sign pair `(upper, lower)` cycling through all four combinations.
pub fn sign_pair(k: usize) -> (f64, f64) {
    [(1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0)][k % 4]
}

pub fn fro(m: &Matrix) -> f64 {
    m.frobenius_norm()
}
