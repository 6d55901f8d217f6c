use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes; the CLI maps them onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Condition,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("total mass must be finite and strictly positive ({0})")]
    NonfiniteMass(String),
    #[error("negative weight: {0}")]
    NegativeWeight(String),
    #[error("simplex violation: {0}")]
    SimplexViolation(String),
    #[error("duplicate atom: {0}")]
    DuplicateAtom(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("condition {condition} violated: {detail}")]
    ConditionViolated {
        condition: &'static str,
        detail: String,
    },
    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),
    #[error("quadrature did not reach tolerance (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("divergent rate integral: {0}")]
    DivergentRate(String),
    #[error("rate table of size {requested} exceeds the ceiling {ceiling}")]
    TableTooLarge { requested: usize, ceiling: usize },
    #[error("rate table covers n <= {available}, but n = {requested} was requested")]
    RateTableTooSmall { requested: usize, available: usize },
    #[error("n = {requested} exceeds the supported maximum {max}")]
    Overflow { requested: usize, max: usize },
    #[error("truncation epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("cannot parse measure file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonfiniteMass(_)
            | Error::NegativeWeight(_)
            | Error::SimplexViolation(_)
            | Error::DuplicateAtom(_)
            | Error::InvalidParameter(_)
            | Error::UnsupportedMeasure(_)
            | Error::BadEpsilon(_)
            | Error::TableTooLarge { .. }
            | Error::RateTableTooSmall { .. }
            | Error::Overflow { .. }
            | Error::Parse(_) => ErrorKind::Validation,
            Error::ConditionViolated { .. } => ErrorKind::Condition,
            Error::QuadratureFailure { .. } | Error::DivergentRate(_) => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
