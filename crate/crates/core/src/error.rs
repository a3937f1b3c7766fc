use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid spectral configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("rate ratio is undefined at n = 0")]
    UndefinedRatio,

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("basis dimension {dim} exceeds limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("state mismatch: {0}")]
    StateMismatch(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("stream format error at line {line}: {message}")]
    StreamFormat { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn ensure_param(
    ok: bool,
    name: &'static str,
    value: f64,
    reason: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SimError::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
