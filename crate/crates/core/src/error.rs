use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NonPositiveDefinite { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("point {point:?} is outside the metric domain (|x| = {radius}, r_c = {r_c})")]
    Domain {
        point: Vec<f64>,
        radius: f64,
        r_c: f64,
    },

    #[error("vector is not tangent to the sphere (radial component {0:e})")]
    NotTangent(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("CFL condition violated: dt = {dt} exceeds the limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("theorem not applicable: {0}")]
    InapplicableTheorem(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
