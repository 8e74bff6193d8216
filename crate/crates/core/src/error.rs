use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is outside the interior of the feasible set (coordinate {index}: {value})")]
    BoundaryPoint { index: usize, value: f64 },

    #[error("point is infeasible: {0}")]
    InfeasiblePoint(String),

    #[error("non-finite value while computing {0}")]
    NumericOverflow(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mirror-step solver did not converge after {iterations} iterations (residual {residual:e})")]
    StepSolverFailure {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("ill-posed prox: lambda * rho = {product} must be < 1")]
    IllPosedProx { product: f64 },

    #[error("prox solver failed (residual {residual:e})")]
    ProxSolverFailure { best: Vec<f64>, residual: f64 },

    #[error("invalid probe set: {0}")]
    InvalidProbe(&'static str),

    #[error("diagnostic unsupported: {0}")]
    UnsupportedDiagnostic(&'static str),

    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    #[error("degenerate gap: envelope at x0 equals T_min, the method would not move")]
    DegenerateGap,

    #[error("iterate became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("mirror step failed at iteration {iteration}: {source}")]
    StepFailedAt {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
