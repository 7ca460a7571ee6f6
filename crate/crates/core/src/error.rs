use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time must be non-negative, got {0} ns")]
    NegativeTime(f64),

    #[error("timestamp range overflow: {0}")]
    TimestampOverflow(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("degenerate transition: |E_f - E_i| = {0:e} Hartree")]
    DegenerateTransition(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed file at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("truncated record body: header declares {expected} records, file holds {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
