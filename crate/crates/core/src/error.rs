use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("point ({x}, {y}) lies outside the interpolation domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("map inversion failed: worst residual {worst_residual:e} at target ({x}, {y})")]
    InversionFailure { worst_residual: f64, x: f64, y: f64 },

    #[error("no finite-difference stencil available at unmasked node {node}")]
    StencilUnavailable { node: usize },

    #[error("geometry error at node {node}: {reason}")]
    Geometry { node: usize, reason: String },

    #[error("singular rotation: eigenvalue {eigenvalue} reaches the limit {limit}")]
    SingularRotation { eigenvalue: f64, limit: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solver: {0}")]
    LinearSolver(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("field file, line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(line: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            line,
            reason: reason.into(),
        }
    }
}
