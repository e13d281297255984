use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("metric is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("point {0:?} lies outside the reference triangle")]
    OutsideReference([f64; 2]),
    #[error("unsupported quadrature degree {0} (supported: 1..=40)")]
    UnsupportedQuadrature(usize),
    #[error("test space too small on element {element}: test dim {test} < trial dim {trial}")]
    InsufficientEnrichment {
        element: usize,
        test: usize,
        trial: usize,
    },
    #[error("missing boundary data on Dirichlet edge {0}")]
    MissingBoundaryData(usize),
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("density undefined: every error coefficient is zero")]
    ZeroErrorField,
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("unsupported target functional: {0}")]
    UnsupportedTarget(String),
    #[error("remeshing failed: {0}")]
    Remesh(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for the command-line driver: 2 for configuration and input
    /// problems, 4 for remeshing, 3 for everything raised by the numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownCase(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
            Error::Remesh(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
