use thiserror::Error;

/// Errors raised by model construction, the oracles, the engine and the CLI.
#[derive(Debug, Error)]
pub enum FrodsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian: max |h_kl - conj(h_lk)| = {max_asymmetry:.3e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("diagram store too large: {keys} keys of dimension {dim}")]
    StoreTooLarge { keys: usize, dim: usize },

    #[error("convergence order undefined: {0}")]
    UndefinedOrder(String),

    #[error("misaligned series: {0}")]
    Misaligned(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FrodsError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        FrodsError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 1 for validation failures, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            FrodsError::DimensionMismatch { .. }
            | FrodsError::NotHermitian { .. }
            | FrodsError::Invalid { .. }
            | FrodsError::OracleLimit(_)
            | FrodsError::StoreTooLarge { .. }
            | FrodsError::Misaligned(_)
            | FrodsError::Config(_) => 1,
            FrodsError::UndefinedOrder(_) | FrodsError::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, FrodsError>;
