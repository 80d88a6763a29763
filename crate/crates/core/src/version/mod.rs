//! PEP 440 versions and specifier sets, plus the constraint-to-pin
//! "guessing" transformation some SBOM tools apply.

mod guess;
mod specifier;
#[allow(clippy::module_inception)]
mod version;

use thiserror::Error;

pub use guess::{guess_pin, guess_pin_detailed, GuessOutcome};
pub use specifier::{
    matches, max_satisfying, parse_specifier_set, Clause, Operator, Selection, VersionSpec,
};
pub use version::{compare, parse_version, LocalSegment, PrePhase, Version};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VersionError {
    #[error("malformed version {0:?}")]
    Malformed(String),
    #[error("unknown operator in specifier clause {0:?}")]
    UnknownOperator(String),
    #[error("wildcard not allowed in {0:?}; only == and != accept `.*`")]
    WildcardNotAllowed(String),
    #[error("`~=` needs at least two release segments, got {0:?}")]
    CompatibleTooShort(String),
    #[error("local version label not allowed in {0:?}; only == and != accept one")]
    LocalNotAllowed(String),
    #[error("arbitrary equality `===` is not supported: {0:?}")]
    ArbitraryEquality(String),
    #[error("empty clause in specifier set {0:?}")]
    EmptyClause(String),
}

impl VersionError {
    /// Diagnostic code that accompanies this error when it is reported.
    pub fn code(&self) -> crate::diagnostics::Code {
        match self {
            VersionError::LocalNotAllowed(_) => crate::diagnostics::Code::LocalInSpec,
            _ => crate::diagnostics::Code::ParseError,
        }
    }
}
