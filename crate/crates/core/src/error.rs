use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are coarse on purpose: the CLI maps them onto exit codes
/// (usage problems versus numerical or validation failures), and the
/// message carries the detail.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate coding: {0}")]
    DegenerateCoding(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("undefined period: component {0} contains no cycle")]
    UndefinedPeriod(usize),

    #[error("inconsistent growth estimates: spectral {spectral}, ratio {ratio}")]
    Inconsistent { spectral: f64, ratio: f64 },

    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("lattice weights: gap {gap:e} at t = {t}; the local limit law does not apply")]
    LatticeWitness { t: f64, gap: f64 },

    #[error("equivalence violated on a group coding: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            residual,
        }
    }
}
