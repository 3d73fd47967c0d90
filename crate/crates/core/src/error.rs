use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Verification failures are never errors: they are recorded as failed
/// entries in an [`AuditReport`](crate::report::AuditReport). Errors are reserved
/// for inputs that cannot be simulated at all.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("index {index} out of range {min}..={max}")]
    IndexOutOfRange { index: usize, min: usize, max: usize },

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("branch error: {0}")]
    BranchKind(String),

    #[error("configuration too large: layout {layout} has dimension {dim}, cap is {cap}")]
    MemoryCap { layout: String, dim: usize, cap: usize },

    #[error("chain precondition failed: {0}")]
    ChainPrecondition(String),

    #[error("malformed document at `{path}`: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
