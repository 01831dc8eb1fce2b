//! Linear transition maps between two quadratic Hamiltonian-like flows.
//!
//! A first system `dξ/dt = I₁ ∇H(ξ)` and a second system
//! `dη/dτ = I₂ ∇H̄(η)`, with `H = ½ ξᵀ H(ξ) ξ`, `H̄ = ½ ηᵀ C(η) η` and
//! sign-block structure matrices `I₁`, `I₂`, are related by `η = T ξ`, where
//!
//! ```text
//! dT/dτ + T I₁ Z = I₂ Y T,    Z = (dt/dτ) X.
//! ```
//!
//! The crate solves this equation by splitting it into a left system for
//! `S` and a right system for `R`, gluing them with a constant matrix `K`
//! (`T = S K R`), and checks the result against direct integration of the
//! `T` equation and against independently integrated trajectories.
//!
//! Configuration spaces may use scalar-field coordinates built from a
//! vielbein; see [`geometry`].

pub mod cli;
pub mod coefficients;
pub mod error;
pub mod flows;
pub mod geometry;
pub mod linalg;
pub mod mapping;
pub mod phase;
pub mod provider;
pub mod scenarios;

pub use coefficients::{compute_x, compute_y, compute_z, energy, CoefficientMatrix};
pub use error::{FlowMapError, Result};
pub use flows::{
    flow_eta, flow_xi, integrate_r, integrate_s, integrate_t_direct, MatrixTrajectory, RhsForm,
    StateTrajectory,
};
pub use geometry::{
    line_element, metric_from_vielbein, signature_of, CoordinateCurve, CoordinateLayer, FlatMetric,
    ScalarFieldChart, Signature, VielbeinField,
};
pub use linalg::{split_blocks, BlockMatrix, Matrix};
pub use mapping::{
    compose_t, recover_second_formalism, solve_mapping, verify_composition, MappingProblem,
    MappingResult, VerificationReport,
};
pub use phase::{
    assemble_sign_matrix, GlueConstants, ParameterGrid, PhaseState, Reparameterization,
    SignBlockMatrix,
};
pub use provider::{
    AffineCoefficients, AnalyticCoefficients, CoefficientProvider, ConstantCoefficients,
    FiniteDifferenceCoefficients, SharedProvider,
};
pub use scenarios::{build_scenario, list_scenarios};
