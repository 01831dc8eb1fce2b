//! Dense row-major matrices and their 2×2 block views.
//!
//! Products accumulate strictly left to right over the inner index, starting
//! from zero. Callers that split a product into block products can therefore
//! reproduce the full product bit-for-bit with [`Matrix::mul_acc`].

use std::fmt;
use std::ops::{Add, Deref, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{FlowMapError, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from a row-major slice.
    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(FlowMapError::Dimension {
                context: "matrix from row slice",
                expected: rows * cols,
                found: values.len(),
            });
        }
        Ok(Matrix {
            rows,
            cols,
            data: values.to_vec(),
        })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(FlowMapError::Dimension {
                    context: "matrix rows",
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.cols.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `(M + Mᵀ) / 2`. The result is symmetric bit-for-bit.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square(), "symmetrized requires a square matrix");
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            0.5 * (self[(lo, hi)] + self[(hi, lo)])
        })
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| factor * x).collect(),
        }
    }

    /// `self + factor * other`, entrywise.
    pub fn add_scaled(&self, factor: f64, other: &Matrix) -> Matrix {
        self.assert_same_shape(other);
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + factor * b)
                .collect(),
        }
    }

    /// Accumulates `a * b` into `self`, continuing each entry's running sum
    /// over the inner index in order.
    pub fn mul_acc(&mut self, a: &Matrix, b: &Matrix) {
        assert_eq!(a.cols, b.rows, "inner dimensions differ");
        assert_eq!((self.rows, self.cols), (a.rows, b.cols), "output shape");
        for i in 0..a.rows {
            for j in 0..b.cols {
                let mut acc = self.data[i * self.cols + j];
                for k in 0..a.cols {
                    acc += a.data[i * a.cols + k] * b.data[k * b.cols + j];
                }
                self.data[i * self.cols + j] = acc;
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimensions differ");
        self.data
            .chunks(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(v).fold(0.0, |acc, (a, b)| acc + a * b))
            .collect()
    }

    /// Copies the `rows × cols` sub-matrix starting at `(r0, c0)`.
    pub fn sub_matrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    fn assert_same_shape(&self, other: &Matrix) {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix shapes differ"
        );
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        out.mul_acc(self, rhs);
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.assert_same_shape(rhs);
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.assert_same_shape(rhs);
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| -x).collect(),
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// A square `2n × 2n` matrix viewed as four `n × n` blocks
/// `[[B₁, B₂], [B₃, B₄]]`.
#[derive(Clone, PartialEq)]
pub struct BlockMatrix {
    n: usize,
    data: Matrix,
}

impl BlockMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if !data.is_square() {
            return Err(FlowMapError::Dimension {
                context: "block matrix (square)",
                expected: data.rows(),
                found: data.cols(),
            });
        }
        if data.rows() == 0 || !data.rows().is_multiple_of(2) {
            return Err(FlowMapError::Dimension {
                context: "block matrix (even, positive order)",
                expected: data.rows() + data.rows() % 2,
                found: data.rows(),
            });
        }
        Ok(BlockMatrix {
            n: data.rows() / 2,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        BlockMatrix {
            n,
            data: Matrix::identity(2 * n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        BlockMatrix {
            n,
            data: Matrix::zeros(2 * n, 2 * n),
        }
    }

    /// Reassembles `[[b1, b2], [b3, b4]]`.
    pub fn from_blocks(b1: &Matrix, b2: &Matrix, b3: &Matrix, b4: &Matrix) -> Result<Self> {
        let n = b1.rows();
        for b in [b1, b2, b3, b4] {
            if b.rows() != n || b.cols() != n {
                return Err(FlowMapError::Dimension {
                    context: "block reassembly",
                    expected: n,
                    found: if b.rows() != n { b.rows() } else { b.cols() },
                });
            }
        }
        if n == 0 {
            return Err(FlowMapError::Dimension {
                context: "block reassembly",
                expected: 1,
                found: 0,
            });
        }
        let data = Matrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => b1[(i, j)],
            (true, false) => b2[(i, j - n)],
            (false, true) => b3[(i - n, j)],
            (false, false) => b4[(i - n, j - n)],
        });
        Ok(BlockMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(B₁, B₂, B₃, B₄)`.
    pub fn split(&self) -> (Matrix, Matrix, Matrix, Matrix) {
        let n = self.n;
        (
            self.data.sub_matrix(0, 0, n, n),
            self.data.sub_matrix(0, n, n, n),
            self.data.sub_matrix(n, 0, n, n),
            self.data.sub_matrix(n, n, n, n),
        )
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }
}

impl Deref for BlockMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.data
    }
}

impl fmt::Debug for BlockMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.data.fmt(f)
    }
}

/// Splits a `2n × 2n` matrix into its four `n × n` blocks.
pub fn split_blocks(m: &Matrix) -> Result<(Matrix, Matrix, Matrix, Matrix)> {
    Ok(BlockMatrix::new(m.clone())?.split())
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_blocks() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let (b1, b2, b3, b4) = split_blocks(&m).unwrap();
        assert_eq!(b1.as_slice(), &[1.0]);
        assert_eq!(b2.as_slice(), &[2.0]);
        assert_eq!(b3.as_slice(), &[3.0]);
        assert_eq!(b4.as_slice(), &[4.0]);
    }

    #[test]
    fn identity_blocks() {
        let (b1, b2, b3, b4) = split_blocks(&Matrix::identity(4)).unwrap();
        assert_eq!(b1, Matrix::identity(2));
        assert_eq!(b4, Matrix::identity(2));
        assert_eq!(b2, Matrix::zeros(2, 2));
        assert_eq!(b3, Matrix::zeros(2, 2));
    }

    #[test]
    fn odd_dimension_rejected() {
        let err = split_blocks(&Matrix::identity(3)).unwrap_err();
        assert!(matches!(err, FlowMapError::Dimension { .. }));
        assert!(split_blocks(&Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn product_matches_hand_computation() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        assert_eq!(
            (&a * &b).to_rows(),
            vec![vec![19.0, 22.0], vec![43.0, 50.0]]
        );
        assert_eq!(a.mul_vec(&[1.0, -1.0]), vec![-1.0, -1.0]);
    }

    #[test]
    fn split_block_products_reproduce_full_product() {
        // Row block 1 of A·B equals A₁B₁ + A₂B₃ when accumulated in order.
        let a = Matrix::from_fn(4, 4, |i, j| (i as f64 + 0.1) / (j as f64 + 0.7));
        let b = Matrix::from_fn(4, 4, |i, j| (i * 3 + j) as f64 * 0.13 - 0.9);
        let full = BlockMatrix::new(&a * &b).unwrap().split();
        let (a1, a2, _, _) = split_blocks(&a).unwrap();
        let (b1, _, b3, _) = split_blocks(&b).unwrap();
        let mut acc = Matrix::zeros(2, 2);
        acc.mul_acc(&a1, &b1);
        acc.mul_acc(&a2, &b3);
        assert_eq!(acc, full.0);
    }

    #[test]
    fn symmetrized_is_exactly_symmetric() {
        let m = Matrix::from_fn(5, 5, |i, j| (i as f64).sin() + 0.3 * j as f64);
        assert!(!m.is_symmetric());
        assert!(m.symmetrized().is_symmetric());
    }

    proptest! {
        #[test]
        fn split_reassemble_round_trip(
            k in 0usize..4,
            seed in proptest::collection::vec(-1e6f64..1e6, 256),
        ) {
            let n = [1usize, 2, 4, 8][k];
            let m = Matrix::from_row_slice(2 * n, 2 * n, &seed[..4 * n * n]).unwrap();
            let (b1, b2, b3, b4) = split_blocks(&m).unwrap();
            let back = BlockMatrix::from_blocks(&b1, &b2, &b3, &b4).unwrap();
            prop_assert_eq!(back.as_matrix(), &m);
        }
    }
}
