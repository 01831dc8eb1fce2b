//! Named, parameterized example problems. Names and parameter keys are part
//! of the command-line contract.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{FlowMapError, Result};
use crate::geometry::{
    line_element, CoordinateCurve, CoordinateLayer, FlatMetric, LineElementReport,
    ScalarFieldChart, VielbeinField,
};
use crate::linalg::Matrix;
use crate::mapping::MappingProblem;
use crate::phase::{GlueConstants, ParameterGrid, PhaseState, Reparameterization, SignBlockMatrix};
use crate::provider::{AffineCoefficients, ConstantCoefficients};

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub key: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [ParamSpec],
}

/// Geometry inputs carried by geometry-bearing scenarios.
#[derive(Debug, Clone)]
pub struct GeometryCase {
    pub vielbein: VielbeinField,
    pub flat: FlatMetric,
    pub curve: CoordinateCurve,
}

impl GeometryCase {
    pub fn evaluate(&self) -> Result<LineElementReport> {
        line_element(&self.vielbein, &self.flat, &self.curve)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioInstance {
    pub problem: MappingProblem,
    pub geometry: Option<GeometryCase>,
}

pub const DEFAULT_TAU_END: f64 = 5.0;
pub const DEFAULT_STEPS: usize = 5000;

const REGISTRY: &[ScenarioSpec] = &[
    ScenarioSpec {
        name: "cubic-coefficient",
        description: "state-dependent H11 = offset + xi1 (cubic Hamiltonian), C = Id, I1 = (-1,+1)",
        params: &[
            ParamSpec {
                key: "offset",
                default: 2.0,
                doc: "constant part of H11",
            },
            ParamSpec {
                key: "q0",
                default: 0.3,
                doc: "initial coordinate xi1",
            },
        ],
    },
    ScenarioSpec {
        name: "harmonic-pair",
        description: "H = Id, C = omega2^2 Id, I1 = I2 = (+1,-1), K = Id",
        params: &[
            ParamSpec {
                key: "glue_perturbation",
                default: 0.0,
                doc: "added to a11 while eta0 stays at Id xi0",
            },
            ParamSpec {
                key: "omega2",
                default: 2.0,
                doc: "C = omega2^2 Id",
            },
        ],
    },
    ScenarioSpec {
        name: "hyperbolic-pair",
        description: "H = Id, C = rate Id, I1 = (+1,+1), I2 = (-1,-1)",
        params: &[ParamSpec {
            key: "rate",
            default: 1.0,
            doc: "C = rate Id",
        }],
    },
    ScenarioSpec {
        name: "identity-pair",
        description: "identical systems H = C = Id, I1 = I2 = (+1,-1), K = Id; T stays Id",
        params: &[],
    },
    ScenarioSpec {
        name: "reparam-affine",
        description: "t = alpha tau + beta, H = Id/2 with I1 = (-1,-1), C = Id with I2 = (+1,-1), general K",
        params: &[
            ParamSpec {
                key: "alpha",
                default: 2.0,
                doc: "dt/dtau",
            },
            ParamSpec {
                key: "beta",
                default: 1.0,
                doc: "t at tau = 0",
            },
        ],
    },
    ScenarioSpec {
        name: "sphere-chart",
        description: "2-sphere vielbein diag(1, sin theta) on (theta, phi) with a latitude-circle line element",
        params: &[ParamSpec {
            key: "theta",
            default: FRAC_PI_2,
            doc: "polar angle of the latitude circle",
        }],
    },
];

/// All scenarios, sorted by name.
pub fn list_scenarios() -> &'static [ScenarioSpec] {
    REGISTRY
}

pub fn find_scenario(name: &str) -> Result<&'static ScenarioSpec> {
    REGISTRY
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| FlowMapError::UnknownScenario(name.to_string()))
}

fn resolve(spec: &ScenarioSpec, params: &Params) -> Result<BTreeMap<&'static str, f64>> {
    if let Some(key) = params
        .keys()
        .find(|k| !spec.params.iter().any(|p| p.key == k.as_str()))
    {
        return Err(FlowMapError::UnknownParameter {
            scenario: spec.name.to_string(),
            key: key.clone(),
        });
    }
    spec.params
        .iter()
        .map(|p| {
            let value = params.get(p.key).copied().unwrap_or(p.default);
            if value.is_finite() {
                Ok((p.key, value))
            } else {
                Err(FlowMapError::InvalidParameter {
                    key: p.key.to_string(),
                    reason: "must be finite".into(),
                })
            }
        })
        .collect()
}

pub fn build_scenario(name: &str, params: &Params) -> Result<MappingProblem> {
    Ok(build_scenario_instance(name, params)?.problem)
}

pub fn build_scenario_instance(name: &str, params: &Params) -> Result<ScenarioInstance> {
    let spec = find_scenario(name)?;
    let p = resolve(spec, params)?;
    let grid = ParameterGrid::new(0.0, DEFAULT_TAU_END, DEFAULT_STEPS)?;
    let symplectic = SignBlockMatrix::symplectic(1);
    let constant = |m: Matrix| ConstantCoefficients::shared(&m);
    let state = |v: &[f64]| PhaseState::new(v.to_vec());

    let instance = match spec.name {
        "identity-pair" => plain(MappingProblem::new(
            constant(Matrix::identity(2))?,
            constant(Matrix::identity(2))?,
            symplectic,
            symplectic,
            Reparameterization::identity(),
            GlueConstants::identity(1),
            state(&[1.0, 0.0])?,
            grid,
        )?),
        "harmonic-pair" => {
            let omega2 = p["omega2"];
            let perturbation = p["glue_perturbation"];
            let mut k = Matrix::identity(2);
            k[(0, 0)] += perturbation;
            let glue = GlueConstants::from_assembled(crate::linalg::BlockMatrix::new(k)?)?;
            let xi0 = state(&[1.0, 0.0])?;
            let mut problem = MappingProblem::new(
                constant(Matrix::identity(2))?,
                constant(Matrix::identity(2).scale(omega2 * omega2))?,
                symplectic,
                symplectic,
                Reparameterization::identity(),
                glue,
                xi0.clone(),
                grid,
            )?;
            if perturbation != 0.0 {
                problem.eta0 = Some(xi0);
            }
            plain(problem)
        }
        "hyperbolic-pair" => plain(MappingProblem::new(
            constant(Matrix::identity(2))?,
            constant(Matrix::identity(2).scale(p["rate"]))?,
            SignBlockMatrix::new(1, 1.0, 1.0)?,
            SignBlockMatrix::new(1, -1.0, -1.0)?,
            Reparameterization::identity(),
            GlueConstants::identity(1),
            state(&[1.0, 0.0])?,
            grid,
        )?),
        "cubic-coefficient" => {
            let base = Matrix::from_diagonal(&[p["offset"], 1.0]);
            plain(MappingProblem::new(
                std::sync::Arc::new(AffineCoefficients::single_entry(&base, 0, 0, 0)?),
                constant(Matrix::identity(2))?,
                SignBlockMatrix::new(1, -1.0, 1.0)?,
                symplectic,
                Reparameterization::identity(),
                GlueConstants::identity(1),
                state(&[p["q0"], 0.0])?,
                grid,
            )?)
        }
        "reparam-affine" => {
            let glue = GlueConstants::new(
                &Matrix::from_diagonal(&[1.0]),
                &Matrix::from_diagonal(&[0.5]),
                &Matrix::from_diagonal(&[1.0]),
                &Matrix::from_diagonal(&[-0.25]),
            )?;
            plain(MappingProblem::new(
                constant(Matrix::identity(2).scale(0.5))?,
                constant(Matrix::identity(2))?,
                SignBlockMatrix::new(1, -1.0, -1.0)?,
                symplectic,
                Reparameterization::affine(p["alpha"], p["beta"]),
                glue,
                state(&[1.0, 0.0])?,
                grid,
            )?)
        }
        "sphere-chart" => {
            let theta = p["theta"];
            let flat = FlatMetric::euclidean(2);
            let mut problem = MappingProblem::new(
                constant(Matrix::identity(4))?,
                constant(Matrix::identity(4))?,
                SignBlockMatrix::symplectic(2),
                SignBlockMatrix::symplectic(2),
                Reparameterization::identity(),
                GlueConstants::identity(2),
                state(&[theta, 0.0, 0.0, 1.0])?,
                grid,
            )?;
            problem.coordinates = CoordinateLayer::ScalarField {
                chart: ScalarFieldChart::new(VielbeinField::sphere()),
                flat: flat.clone(),
            };
            let lambda = ParameterGrid::new(0.0, std::f64::consts::TAU, 1000)?;
            let curve = CoordinateCurve::new(lambda, move |l| vec![theta, l], |_| vec![0.0, 1.0]);
            ScenarioInstance {
                problem,
                geometry: Some(GeometryCase {
                    vielbein: VielbeinField::sphere(),
                    flat,
                    curve,
                }),
            }
        }
        other => unreachable!("registered scenario {other} has no builder"),
    };
    Ok(instance)
}

fn plain(problem: MappingProblem) -> ScenarioInstance {
    ScenarioInstance {
        problem,
        geometry: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_complete() {
        let names: Vec<_> = list_scenarios().iter().map(|s| s.name).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
        for required in [
            "identity-pair",
            "harmonic-pair",
            "hyperbolic-pair",
            "cubic-coefficient",
            "reparam-affine",
            "sphere-chart",
        ] {
            assert!(names.contains(&required), "{required}");
        }
    }

    #[test]
    fn harmonic_pair_layout() {
        let params = Params::from([("omega2".to_string(), 2.0)]);
        let p = build_scenario("harmonic-pair", &params).unwrap();
        assert_eq!(p.provider_h.eval(&[0.0, 0.0]), Matrix::identity(2));
        assert_eq!(
            p.provider_c.eval(&[0.0, 0.0]),
            Matrix::from_diagonal(&[4.0, 4.0])
        );
        assert!(p.i1.is_antisymmetric());
        assert_eq!(p.i1, p.i2);
        assert_eq!(p.glue, GlueConstants::identity(1));
        assert!(p.eta0.is_none());
    }

    #[test]
    fn all_sign_combinations_covered() {
        let mut seen = std::collections::BTreeSet::new();
        for spec in list_scenarios() {
            let p = build_scenario(spec.name, &Params::new()).unwrap();
            seen.insert((p.i1.eps_upper() as i8, p.i1.eps_lower() as i8));
        }
        assert_eq!(seen.len(), 4, "{seen:?}");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_scenario("no-such", &Params::new()),
            Err(FlowMapError::UnknownScenario(_))
        ));
        let extra = Params::from([("omega3".to_string(), 1.0)]);
        assert!(matches!(
            build_scenario("harmonic-pair", &extra),
            Err(FlowMapError::UnknownParameter { .. })
        ));
        let bad = Params::from([("omega2".to_string(), f64::NAN)]);
        assert!(build_scenario("harmonic-pair", &bad).is_err());
    }

    #[test]
    fn sphere_chart_geometry() {
        let inst = build_scenario_instance("sphere-chart", &Params::new()).unwrap();
        let geo = inst.geometry.expect("sphere-chart carries geometry");
        let report = geo.evaluate().unwrap();
        assert!((report.arc_length - std::f64::consts::TAU).abs() < 1e-6);
        assert!(matches!(
            inst.problem.coordinates,
            CoordinateLayer::ScalarField { .. }
        ));
    }
}
