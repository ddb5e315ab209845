use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has zero dimension")]
    Empty,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("{0} did not converge within the iteration cap")]
    NotConverged(&'static str),

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPsd { eigenvalue: f64 },

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("operator norm {norm:.6} exceeds 1")]
    NotContraction { norm: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel is not trace preserving (residual {residual:.3e})")]
    NotCptp { residual: f64 },

    #[error("post-selection succeeded with zero probability")]
    ZeroProbability,

    #[error("phase convention mismatch: expected {expected}, got {found}")]
    ConventionMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("parity mismatch: {0}")]
    ParityMismatch(String),

    #[error("phase solver stalled with rms residual {residual:.3e}")]
    SolverNonConvergence {
        residual: f64,
        best: Box<crate::qsp::PhaseSequence>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
