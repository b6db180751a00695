use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not positive semidefinite: pivot {pivot:e} at index {index}")]
    NotPsd { index: usize, pivot: f64 },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("sample budget {got} is below the minimum {min}")]
    BudgetTooSmall { got: usize, min: usize },

    #[error("quadrature oracle supports dimension <= 3, got {0}")]
    DimensionTooLarge(usize),

    #[error("bodies are built over different correlation models")]
    ModelMismatch,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("direction must be nonzero")]
    ZeroDirection,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("simplex solver failed: {0}")]
    SolverFailure(String),

    #[error("body is not unconditional: {0}")]
    NotUnconditional(String),

    #[error("lattice premise violated: {0}")]
    PremiseViolated(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("model is not standardized: variance {variance} at index {index}")]
    NotStandardized { index: usize, variance: f64 },

    #[error("body is unbounded: {0}")]
    Unbounded(String),

    #[error("csv input: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Csv(err.to_string())
    }
}
