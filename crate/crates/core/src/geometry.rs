//! Scalar-field coordinate geometry: flat metrics, vielbeins, the induced
//! metric `G = Eᵀ η E` and line elements along coordinate curves.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{FlowMapError, Result};
use crate::linalg::Matrix;
use crate::phase::ParameterGrid;

/// Diagonal flat metric with entries `±1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatMetric {
    signs: Vec<f64>,
}

impl FlatMetric {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.is_empty() {
            return Err(FlowMapError::Dimension {
                context: "flat metric",
                expected: 1,
                found: 0,
            });
        }
        if let Some(&bad) = signs.iter().find(|&&s| s != 1.0 && s != -1.0) {
            return Err(FlowMapError::InvalidSign {
                field: "flat metric",
                value: bad,
            });
        }
        Ok(FlatMetric { signs })
    }

    pub fn euclidean(dim: usize) -> Self {
        FlatMetric {
            signs: vec![1.0; dim.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn count_positive(&self) -> usize {
        self.signs.iter().filter(|&&s| s > 0.0).count()
    }

    pub fn count_negative(&self) -> usize {
        self.dim() - self.count_positive()
    }
}

type FrameFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// `Q ↦ E(Q)`, rows indexed by the flat index, columns by the coordinate
/// index.
#[derive(Clone)]
pub struct VielbeinField {
    dim: usize,
    name: &'static str,
    frame: FrameFn,
}

impl VielbeinField {
    pub fn from_fn(dim: usize, frame: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        VielbeinField {
            dim,
            name: "custom",
            frame: Arc::new(frame),
        }
    }

    pub fn identity(dim: usize) -> Self {
        VielbeinField {
            dim,
            name: "identity",
            frame: Arc::new(move |_| Matrix::identity(dim)),
        }
    }

    /// Unit 2-sphere in `(θ, φ)`: `E = diag(1, sin θ)`.
    pub fn sphere() -> Self {
        VielbeinField {
            dim: 2,
            name: "sphere",
            frame: Arc::new(|q| Matrix::from_diagonal(&[1.0, q[0].sin()])),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn eval(&self, q: &[f64]) -> Result<Matrix> {
        if q.len() != self.dim {
            return Err(FlowMapError::Dimension {
                context: "vielbein point",
                expected: self.dim,
                found: q.len(),
            });
        }
        let e = (self.frame)(q);
        if e.rows() != self.dim || e.cols() != self.dim {
            return Err(FlowMapError::Dimension {
                context: "vielbein output",
                expected: self.dim,
                found: e.rows(),
            });
        }
        if !e.is_finite() {
            return Err(FlowMapError::NonFinite("vielbein"));
        }
        Ok(e)
    }
}

impl fmt::Debug for VielbeinField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VielbeinField")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .finish()
    }
}

/// Scalar-field coordinates `Q^(A) = Σ_Π E_Π^(A)(Q) Q^Π`.
#[derive(Debug, Clone)]
pub struct ScalarFieldChart {
    pub vielbein: VielbeinField,
}

impl ScalarFieldChart {
    pub fn new(vielbein: VielbeinField) -> Self {
        ScalarFieldChart { vielbein }
    }

    pub fn eval_scalars(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.vielbein.eval(q)?.mul_vec(q))
    }
}

/// How the configuration-space coordinates of a problem are interpreted.
#[derive(Debug, Clone, Default)]
pub enum CoordinateLayer {
    /// Ordinary local coordinates.
    #[default]
    Ordinary,
    /// Scalar-field coordinates built from a vielbein.
    ScalarField {
        chart: ScalarFieldChart,
        flat: FlatMetric,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricEvaluation {
    pub metric: Matrix,
    /// Set when `E` is numerically singular at the point.
    pub degenerate: bool,
}

const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// `G_ΛΠ = Σ_A E_Λ^(A) η_AA E_Π^(A)`.
pub fn metric_from_vielbein(
    v: &VielbeinField,
    flat: &FlatMetric,
    q: &[f64],
) -> Result<MetricEvaluation> {
    if flat.dim() != v.dim() {
        return Err(FlowMapError::Dimension {
            context: "flat metric vs vielbein",
            expected: v.dim(),
            found: flat.dim(),
        });
    }
    let e = v.eval(q)?;
    let dim = v.dim();
    let mut g = Matrix::zeros(dim, dim);
    for l in 0..dim {
        for p in l..dim {
            let value = (0..dim).fold(0.0, |acc, a| acc + e[(a, l)] * e[(a, p)] * flat.signs()[a]);
            g[(l, p)] = value;
            g[(p, l)] = value;
        }
    }
    let det = DMatrix::from_row_slice(dim, dim, e.as_slice()).determinant();
    let scale = e.max_abs().max(1.0).powi(dim as i32);
    Ok(MetricEvaluation {
        metric: g,
        degenerate: det.abs() <= DEGENERACY_TOLERANCE * scale,
    })
}

type CurveFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A curve `λ ↦ Q(λ)` with its velocity, sampled on a grid.
#[derive(Clone)]
pub struct CoordinateCurve {
    pub lambda_grid: ParameterGrid,
    eval: CurveFn,
    deriv: CurveFn,
}

impl CoordinateCurve {
    pub fn new(
        lambda_grid: ParameterGrid,
        eval: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        deriv: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        CoordinateCurve {
            lambda_grid,
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        }
    }

    /// `(cos λ, sin λ)` for `λ ∈ [0, 2π]`.
    pub fn unit_circle(steps: usize) -> Result<Self> {
        let grid = ParameterGrid::new(0.0, std::f64::consts::TAU, steps)?;
        Ok(CoordinateCurve::new(
            grid,
            |l| vec![l.cos(), l.sin()],
            |l| vec![-l.sin(), l.cos()],
        ))
    }

    /// Sphere equator `(θ, φ) = (π/2, λ)` for `λ ∈ [0, 2π]`.
    pub fn equator(steps: usize) -> Result<Self> {
        let grid = ParameterGrid::new(0.0, std::f64::consts::TAU, steps)?;
        Ok(CoordinateCurve::new(
            grid,
            |l| vec![std::f64::consts::FRAC_PI_2, l],
            |_| vec![0.0, 1.0],
        ))
    }

    pub fn eval(&self, lambda: f64) -> Vec<f64> {
        (self.eval)(lambda)
    }

    pub fn deriv(&self, lambda: f64) -> Vec<f64> {
        (self.deriv)(lambda)
    }

    /// Largest gap between `deriv` and a central difference of `eval`.
    pub fn derivative_mismatch(&self, step: f64) -> f64 {
        self.lambda_grid
            .points()
            .into_iter()
            .map(|l| {
                let (plus, minus) = (self.eval(l + step), self.eval(l - step));
                self.deriv(l)
                    .iter()
                    .enumerate()
                    .map(|(i, d)| ((plus[i] - minus[i]) / (2.0 * step) - d).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for CoordinateCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoordinateCurve")
            .field("lambda_grid", &self.lambda_grid)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineElementReport {
    pub lambda: Vec<f64>,
    /// `Q̇ᵀ G(Q) Q̇` at each sample.
    pub ds2: Vec<f64>,
    /// `∫ √|Q̇ᵀ G Q̇| dλ`.
    pub arc_length: f64,
    pub spacelike_length: f64,
    pub timelike_length: f64,
    pub degenerate_samples: usize,
}

pub fn line_element(
    v: &VielbeinField,
    flat: &FlatMetric,
    curve: &CoordinateCurve,
) -> Result<LineElementReport> {
    let lambda = curve.lambda_grid.points();
    let mut ds2 = Vec::with_capacity(lambda.len());
    let mut degenerate_samples = 0;
    for &l in &lambda {
        let q = curve.eval(l);
        let qdot = curve.deriv(l);
        if qdot.len() != q.len() {
            return Err(FlowMapError::Dimension {
                context: "curve velocity",
                expected: q.len(),
                found: qdot.len(),
            });
        }
        let metric = metric_from_vielbein(v, flat, &q)?;
        degenerate_samples += usize::from(metric.degenerate);
        let gq = metric.metric.mul_vec(&qdot);
        let value = qdot.iter().zip(&gq).fold(0.0, |acc, (a, b)| acc + a * b);
        if !value.is_finite() {
            return Err(FlowMapError::NonFinite("line element"));
        }
        ds2.push(value);
    }
    let h = curve.lambda_grid.h();
    let spacelike: Vec<f64> = ds2.iter().map(|&d| d.max(0.0).sqrt()).collect();
    let timelike: Vec<f64> = ds2.iter().map(|&d| (-d).max(0.0).sqrt()).collect();
    let absolute: Vec<f64> = ds2.iter().map(|d| d.abs().sqrt()).collect();
    Ok(LineElementReport {
        lambda,
        arc_length: simpson(&absolute, h),
        spacelike_length: simpson(&spacelike, h),
        timelike_length: simpson(&timelike, h),
        ds2,
        degenerate_samples,
    })
}

/// Composite Simpson rule on equally spaced samples. An odd number of
/// intervals closes with the three-eighths rule on the last three.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let intervals = values.len().saturating_sub(1);
    match intervals {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let even = if intervals.is_multiple_of(2) {
                intervals
            } else {
                intervals - 3
            };
            let mut sum = 0.0;
            if even > 0 {
                let mut acc = values[0] + values[even];
                for (i, v) in values.iter().enumerate().take(even).skip(1) {
                    acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
                }
                sum += acc * h / 3.0;
            }
            if even < intervals {
                let t = &values[even..];
                sum += 3.0 * h / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3]);
            }
            sum
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub plus: usize,
    pub minus: usize,
    pub zero: usize,
}

/// Eigenvalues with `|λ| ≤ 1e-10 · max(1, max|λ|)` count as zero.
pub const SIGNATURE_ZERO_TOLERANCE: f64 = 1e-10;

pub fn signature_of(g: &Matrix) -> Result<Signature> {
    if !g.is_square() {
        return Err(FlowMapError::Dimension {
            context: "signature (square)",
            expected: g.rows(),
            found: g.cols(),
        });
    }
    if !g.is_finite() {
        return Err(FlowMapError::NonFinite("signature input"));
    }
    let dim = g.rows();
    let eig = DMatrix::from_row_slice(dim, dim, g.symmetrized().as_slice()).symmetric_eigenvalues();
    let scale = eig.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    let cutoff = SIGNATURE_ZERO_TOLERANCE * scale;
    let mut sig = Signature {
        plus: 0,
        minus: 0,
        zero: 0,
    };
    for &l in eig.iter() {
        if l.abs() <= cutoff {
            sig.zero += 1;
        } else if l > 0.0 {
            sig.plus += 1;
        } else {
            sig.minus += 1;
        }
    }
    Ok(sig)
}
