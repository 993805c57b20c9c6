use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::fit::FitResult;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two inputs disagree on a dimension.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A dataset failed validation.
    InvalidData(String),
    /// A parameter is out of its admissible range.
    InvalidParameter(String),
    /// The penalty family is not accepted by the requested routine.
    FamilyMismatch {
        routine: &'static str,
        family: &'static str,
    },
    /// `X'DX` is numerically singular and the ridge fallback is disabled.
    SingularDesign,
    /// A ridge / Newton system could not be factorized.
    SingularSystem,
    /// An iterative routine hit its iteration budget. Estimators attach the
    /// last iterate so callers can still report it.
    NonConvergence {
        routine: &'static str,
        iterations: usize,
        partial: Option<Box<FitResult>>,
    },
    /// Exhaustive enumeration was requested for too many predictors.
    TooManyPredictors { p: usize, max_p: usize },
}

impl Error {
    pub(crate) fn non_convergence(routine: &'static str, iterations: usize) -> Self {
        Error::NonConvergence {
            routine,
            iterations,
            partial: None,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, found {found}"),
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::FamilyMismatch { routine, family } => {
                write!(f, "{routine} does not accept the {family} penalty")
            }
            Error::SingularDesign => f.write_str("design is numerically singular"),
            Error::SingularSystem => f.write_str("linear system is numerically singular"),
            Error::NonConvergence {
                routine,
                iterations,
                ..
            } => write!(f, "{routine} did not converge after {iterations} iterations"),
            Error::TooManyPredictors { p, max_p } => write!(
                f,
                "best subset enumeration over {p} predictors exceeds the limit of {max_p}"
            ),
        }
    }
}

impl core::error::Error for Error {}
