use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum FunqError {
    #[error("curves live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no covariate lies within the bandwidth of the evaluation point")]
    EmptyNeighborhood,

    #[error("neighborhood too small: {count} positive-weight observations, need at least {required}")]
    DegenerateNeighborhood { count: usize, required: usize },

    #[error("objective is not differentiable at response {0}")]
    NotDifferentiable(usize),

    #[error("Hessian could not be factorized even after ridge regularization")]
    SingularHessian,

    #[error("p must lie strictly between 0 and 1, got {0}")]
    InvalidP(f64),

    #[error("every candidate bandwidth is infeasible")]
    AllInfeasible,

    #[error("missing value for unit {unit} at time {time}")]
    MissingCell { unit: String, time: String },

    #[error("unit {0} does not cover the shared time grid")]
    RaggedPanel(String),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FunqError>;

impl From<csv::Error> for FunqError {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => FunqError::Io(io),
            other => FunqError::ParseError {
                line,
                message: format!("{other:?}"),
            },
        }
    }
}

impl From<serde_json::Error> for FunqError {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            return FunqError::Io(err.into());
        }
        FunqError::ParseError {
            line: err.line() as u64,
            message: err.to_string(),
        }
    }
}
