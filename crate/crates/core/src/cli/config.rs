//! TOML run configuration.
//!
//! A config names either a registered scenario (with optional parameter
//! overrides) or an explicit problem:
//!
//! ```toml
//! tolerance = 1e-6
//! output_dir = "out"
//!
//! [grid]
//! tau_start = 0.0
//! tau_end = 5.0
//! steps = 5000
//!
//! [problem]
//! n = 1
//! eps1 = 1
//! eps2 = -1
//! eps3 = 1
//! eps4 = -1
//! H = [[1.0, 0.0], [0.0, 1.0]]
//! C = { formula = "cubic-q1", base = [[2.0, 0.0], [0.0, 1.0]] }
//! xi0 = [1.0, 0.0]
//! reparam = { alpha = 2.0, beta = 1.0 }
//! glue = { a = [[1.0]], b = [[0.0]], c = [[1.0]], d = [[0.0]] }
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Deserialize;

use crate::geometry::LineElementReport;
use crate::linalg::Matrix;
use crate::mapping::MappingProblem;
use crate::phase::{GlueConstants, ParameterGrid, PhaseState, Reparameterization, SignBlockMatrix};
use crate::provider::{AffineCoefficients, ConstantCoefficients, SharedProvider};
use crate::scenarios::{build_scenario_instance, DEFAULT_STEPS, DEFAULT_TAU_END};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_OUTPUT_DIR: &str = "flowmap-out";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub problem: Option<ProblemConfig>,
    pub grid: Option<GridConfig>,
    pub output_dir: Option<PathBuf>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub tau_start: f64,
    pub tau_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    pub eps1: i64,
    pub eps2: i64,
    pub eps3: i64,
    pub eps4: i64,
    #[serde(rename = "H")]
    pub h: CoefficientConfig,
    #[serde(rename = "C")]
    pub c: CoefficientConfig,
    pub reparam: Option<ReparamConfig>,
    pub glue: Option<GlueConfig>,
    pub xi0: Vec<f64>,
    pub eta0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CoefficientConfig {
    Matrix(Vec<Vec<f64>>),
    Formula {
        formula: String,
        base: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparamConfig {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

/// Built-in coefficient formulas available to explicit problems.
pub const FORMULAS: &[(&str, &str)] = &[(
    "cubic-q1",
    "base + xi1 at entry (1,1); the Hamiltonian gains a (xi1)^3 / 2 term",
)];

/// A validated run: the problem plus everything needed to report on it.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub label: String,
    pub problem: MappingProblem,
    pub geometry: Option<LineElementReport>,
    pub tolerance: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Validates the config and builds its problem. Errors name the
    /// offending field.
    pub fn prepare(&self) -> Result<PreparedRun, String> {
        let tolerance = self.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(format!(
                "tolerance must be positive and finite, got {tolerance}"
            ));
        }
        let (label, mut problem, geometry) = match (&self.scenario, &self.problem) {
            (Some(_), Some(_)) => {
                return Err(
                    "config must set exactly one of 'scenario' and 'problem', not both".into(),
                )
            }
            (None, None) => return Err("config must set one of 'scenario' or 'problem'".into()),
            (Some(name), None) => {
                let inst = build_scenario_instance(name, &self.params)
                    .map_err(|e| format!("scenario: {e}"))?;
                let geometry = match &inst.geometry {
                    Some(g) => Some(
                        g.evaluate()
                            .map_err(|e| format!("scenario geometry: {e}"))?,
                    ),
                    None => None,
                };
                (name.clone(), inst.problem, geometry)
            }
            (None, Some(p)) => {
                if !self.params.is_empty() {
                    return Err("'params' only applies to scenarios".into());
                }
                ("explicit".to_string(), p.build()?, None)
            }
        };
        if let Some(g) = &self.grid {
            let grid = ParameterGrid::new(g.tau_start, g.tau_end, g.steps)
                .map_err(|e| format!("grid: {e}"))?;
            problem = problem.with_grid(grid);
        }
        Ok(PreparedRun {
            label,
            problem,
            geometry,
            tolerance,
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        })
    }
}

fn sign(field: &str, value: i64) -> Result<f64, String> {
    match value {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        other => Err(format!("problem.{field} must be -1 or +1, got {other}")),
    }
}

fn matrix(field: &str, rows: &[Vec<f64>], order: usize) -> Result<Matrix, String> {
    let m = Matrix::from_rows(rows).map_err(|e| format!("problem.{field}: {e}"))?;
    if m.rows() != order || m.cols() != order {
        return Err(format!(
            "problem.{field} must be {order}x{order}, got {}x{}",
            m.rows(),
            m.cols()
        ));
    }
    if !m.is_finite() {
        return Err(format!("problem.{field} has non-finite entries"));
    }
    Ok(m)
}

impl CoefficientConfig {
    fn provider(&self, field: &str, n: usize) -> Result<SharedProvider, String> {
        let order = 2 * n;
        match self {
            CoefficientConfig::Matrix(rows) => {
                let m = matrix(field, rows, order)?;
                Ok(
                    ConstantCoefficients::shared(&m)
                        .map_err(|e| format!("problem.{field}: {e}"))?,
                )
            }
            CoefficientConfig::Formula { formula, base } => {
                let base = match base {
                    Some(rows) => matrix(field, rows, order)?,
                    None => Matrix::zeros(order, order),
                };
                match formula.as_str() {
                    "cubic-q1" => Ok(Arc::new(
                        AffineCoefficients::single_entry(&base, 0, 0, 0)
                            .map_err(|e| format!("problem.{field}: {e}"))?,
                    )),
                    other => Err(format!(
                        "problem.{field}: unknown formula '{other}' (known: {})",
                        FORMULAS.iter().map(|f| f.0).collect::<Vec<_>>().join(", ")
                    )),
                }
            }
        }
    }
}

impl ProblemConfig {
    pub fn build(&self) -> Result<MappingProblem, String> {
        let n = self.n;
        if n == 0 {
            return Err("problem.n must be at least 1".into());
        }
        let i1 = SignBlockMatrix::new(n, sign("eps1", self.eps1)?, sign("eps2", self.eps2)?)
            .map_err(|e| e.to_string())?;
        let i2 = SignBlockMatrix::new(n, sign("eps3", self.eps3)?, sign("eps4", self.eps4)?)
            .map_err(|e| e.to_string())?;
        let provider_h = self.h.provider("H", n)?;
        let provider_c = self.c.provider("C", n)?;
        let reparam = match &self.reparam {
            Some(r) if r.alpha.is_finite() && r.beta.is_finite() => {
                Reparameterization::affine(r.alpha, r.beta)
            }
            Some(_) => return Err("problem.reparam: alpha and beta must be finite".into()),
            None => Reparameterization::identity(),
        };
        let glue = match &self.glue {
            Some(g) => GlueConstants::new(
                &matrix("glue.a", &g.a, n)?,
                &matrix("glue.b", &g.b, n)?,
                &matrix("glue.c", &g.c, n)?,
                &matrix("glue.d", &g.d, n)?,
            )
            .map_err(|e| format!("problem.glue: {e}"))?,
            None => GlueConstants::identity(n),
        };
        let state = |field: &str, v: &[f64]| -> Result<PhaseState, String> {
            if v.len() != 2 * n {
                return Err(format!(
                    "problem.{field} must have {} entries, got {}",
                    2 * n,
                    v.len()
                ));
            }
            PhaseState::new(v.to_vec()).map_err(|e| format!("problem.{field}: {e}"))
        };
        let xi0 = state("xi0", &self.xi0)?;
        let grid =
            ParameterGrid::new(0.0, DEFAULT_TAU_END, DEFAULT_STEPS).map_err(|e| e.to_string())?;
        let mut problem =
            MappingProblem::new(provider_h, provider_c, i1, i2, reparam, glue, xi0, grid)
                .map_err(|e| format!("problem: {e}"))?;
        if let Some(eta0) = &self.eta0 {
            problem.eta0 = Some(state("eta0", eta0)?);
        }
        Ok(problem)
    }
}
