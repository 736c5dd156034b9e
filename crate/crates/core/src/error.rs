//! Error type shared across the library, with a coarse category used by the
//! CLI to pick process exit codes.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Model construction or update with invalid parameters.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// State of charge outside `[0, 1]` or not finite.
    #[error("invalid SOC fraction {0}: must be finite and within [0, 1]")]
    InvalidSoc(f64),

    /// A scalar argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Table rows violate ordering, span, or finiteness requirements.
    #[error("invalid table: {0}")]
    InvalidTable(String),

    /// Two tables cannot be combined because their SOC ranges do not overlap.
    #[error("incompatible tables: {0}")]
    IncompatibleTables(String),

    /// The regressor matrix is numerically rank deficient.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Fewer observations than coefficients to determine.
    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The model is not strictly increasing, so voltage lookup is ambiguous.
    #[error("ambiguous inverse: model is not strictly increasing over its SOC domain")]
    AmbiguousInverse,

    /// SOC endpoints too close together to observe capacity.
    #[error("ill-conditioned SOC delta {0}: endpoints are too close to estimate capacity")]
    IllConditionedDelta(f64),

    /// An error budget listed the same source kind twice.
    #[error("duplicate error source kind: {0}")]
    DuplicateSource(String),

    /// Malformed textual input that is not covered by the csv/json errors.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse classification used to map an [`Error`] onto a CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Malformed input files or values: exit code 2.
    Parse,
    /// Domain violations (non-monotone model, ill-conditioned data): exit code 3.
    Domain,
    /// Filesystem problems: exit code 4.
    Io,
}

impl Error {
    /// Classifies the error for exit-code mapping.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Parse(_) | Error::Csv(_) | Error::Json(_) => ErrorCategory::Parse,
            Error::Io(_) => ErrorCategory::Io,
            _ => ErrorCategory::Domain,
        }
    }
}
