use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("size violation: {0}")]
    SizeViolation(String),
    #[error("population has no structures")]
    EmptyStructures,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("denominator N - r - theta + 1 = {0} is not positive")]
    DenominatorViolation(i64),
    #[error("enumeration too large: C({n}, {r}) exceeds {limit}")]
    TooLarge { n: usize, r: usize, limit: u64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("could not draw separated models after {0} attempts")]
    SeparationFailure(usize),
    #[error("degenerate minimal sample")]
    Degenerate,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    /// Short machine-readable tag used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SizeViolation(_) => "size_violation",
            Error::EmptyStructures => "empty_structures",
            Error::Domain(_) => "domain",
            Error::DenominatorViolation(_) => "denominator_violation",
            Error::TooLarge { .. } => "too_large",
            Error::Infeasible(_) => "infeasible",
            Error::SeparationFailure(_) => "separation_failure",
            Error::Degenerate => "degenerate",
        }
    }
}
