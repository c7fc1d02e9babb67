use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid refinement level {0}, expected k >= 1")]
    InvalidLevel(i64),

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("edge {0} is an interior edge")]
    InteriorEdge(usize),

    #[error("degenerate triangle {0} (signed area {1:e})")]
    DegenerateTriangle(usize, f64),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("solver failure at level k={level}, step n={step}: {source}")]
    StepFailure {
        level: u32,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step index mismatch: previous state has n={prev}, requested n={requested}")]
    StepIndex { prev: usize, requested: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
