use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowMapError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid sign {value} for {field}: must be -1 or +1")]
    InvalidSign { field: &'static str, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("trajectory grids do not match in {0}")]
    GridMismatch(&'static str),

    #[error("{stage} diverged at grid index {index} (tau = {tau})")]
    Divergence {
        stage: &'static str,
        index: usize,
        tau: f64,
    },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("scenario '{scenario}' has no parameter '{key}'")]
    UnknownParameter { scenario: String, key: String },

    #[error("invalid parameter '{key}': {reason}")]
    InvalidParameter { key: String, reason: String },
}

pub type Result<T> = std::result::Result<T, FlowMapError>;
