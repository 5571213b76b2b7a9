use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("invalid interaction matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("constants undefined for nonconvex objective: {0}")]
    NonconvexConstants(String),

    #[error("invalid partition request: {0}")]
    InvalidPartition(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperParams(String),

    #[error("no admissible step size: {0}")]
    NoAdmissibleStepSize(String),

    #[error("divergence at iteration {iteration}: |theta| = {theta_norm:.3e}, max |g| = {grad_norm:.3e}")]
    Divergence {
        iteration: usize,
        theta_norm: f64,
        grad_norm: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("idx format error: {0}")]
    IdxFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
