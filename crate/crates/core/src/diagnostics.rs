//! Diagnostic taxonomy.
//!
//! Tool-side hazards use `T1`..`T7`, ecosystem hazards use `E1`..`E9`, and
//! codes specific to this tool are prefixed with `A-`. When a `T` code is
//! emitted at `info` level it records that the hazard was avoided (for
//! example `T1 info` says pyproject.toml was read).

use std::fmt;

use serde::{Serialize, Serializer};

use crate::model::{Origin, PackageName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Code {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    LocalInSpec,
    Unresolved,
    VersionConflict,
    Prerelease,
    GuessConflict,
    ExcludedGroup,
    ParseError,
    Marker,
    VersionFromUrl,
    AmbiguousLockfile,
    NoLockEdges,
    UnsupportedConstraint,
    IgnoredOption,
}

impl Code {
    pub const ALL: [Code; 29] = [
        Code::T1,
        Code::T2,
        Code::T3,
        Code::T4,
        Code::T5,
        Code::T6,
        Code::T7,
        Code::E1,
        Code::E2,
        Code::E3,
        Code::E4,
        Code::E5,
        Code::E6,
        Code::E7,
        Code::E8,
        Code::E9,
        Code::LocalInSpec,
        Code::Unresolved,
        Code::VersionConflict,
        Code::Prerelease,
        Code::GuessConflict,
        Code::ExcludedGroup,
        Code::ParseError,
        Code::Marker,
        Code::VersionFromUrl,
        Code::AmbiguousLockfile,
        Code::NoLockEdges,
        Code::UnsupportedConstraint,
        Code::IgnoredOption,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Code::T1 => "T1",
            Code::T2 => "T2",
            Code::T3 => "T3",
            Code::T4 => "T4",
            Code::T5 => "T5",
            Code::T6 => "T6",
            Code::T7 => "T7",
            Code::E1 => "E1",
            Code::E2 => "E2",
            Code::E3 => "E3",
            Code::E4 => "E4",
            Code::E5 => "E5",
            Code::E6 => "E6",
            Code::E7 => "E7",
            Code::E8 => "E8",
            Code::E9 => "E9",
            Code::LocalInSpec => "A-LOCAL-IN-SPEC",
            Code::Unresolved => "A-UNRESOLVED",
            Code::VersionConflict => "A-VERSION-CONFLICT",
            Code::Prerelease => "A-PRERELEASE",
            Code::GuessConflict => "A-GUESS-CONFLICT",
            Code::ExcludedGroup => "A-EXCLUDED-GROUP",
            Code::ParseError => "A-PARSE-ERROR",
            Code::Marker => "A-MARKER",
            Code::VersionFromUrl => "A-VERSION-FROM-URL",
            Code::AmbiguousLockfile => "A-AMBIGUOUS-LOCKFILE",
            Code::NoLockEdges => "A-NO-LOCK-EDGES",
            Code::UnsupportedConstraint => "A-UNSUPPORTED-CONSTRAINT",
            Code::IgnoredOption => "A-IGNORED-OPTION",
        }
    }

    pub fn parse(s: &str) -> Option<Code> {
        Code::ALL.iter().copied().find(|c| c.as_str() == s)
    }

    /// Fixed meaning of each code.
    pub fn meaning(self) -> &'static str {
        match self {
            Code::T1 => "pyproject.toml not considered as a dependency source",
            Code::T2 => "lockfile not considered as a dependency source",
            Code::T3 => "dependency without a pinned version ignored",
            Code::T4 => "optional or development dependency group not parsed",
            Code::T5 => "package URL not parsed",
            Code::T6 => "dependency version guessed from a constraint",
            Code::T7 => "package origin not reported",
            Code::E1 => "project has two build interfaces, setup.py and pyproject.toml",
            Code::E2 => "no lockfile present; its use is not mandatory",
            Code::E3 => "requirements file with a non-standard name",
            Code::E4 => "metadata files list only direct dependencies",
            Code::E5 => "package manager does not create a lockfile",
            Code::E6 => "no single standard for declaring optional dependencies",
            Code::E7 => "package manager does not record the package version",
            Code::E8 => "lockfile format is not standardized",
            Code::E9 => "version omitted in a metadata file",
            Code::LocalInSpec => "local version label used with an ordering operator",
            Code::Unresolved => "package could not be resolved against the index",
            Code::VersionConflict => "chosen version does not satisfy another requirement",
            Code::Prerelease => "pre-release selected because no final release matched",
            Code::GuessConflict => "version guessing found conflicting candidates",
            Code::ExcludedGroup => "dependencies excluded by group policy",
            Code::ParseError => "metadata file could not be parsed",
            Code::Marker => "environment marker could not be evaluated exactly",
            Code::VersionFromUrl => "version taken from an archive file name",
            Code::AmbiguousLockfile => "lockfile dialect could not be determined",
            Code::NoLockEdges => "lockfile dialect does not record dependency edges",
            Code::UnsupportedConstraint => "version constraint form not supported",
            Code::IgnoredOption => "requirements option has no effect on the inventory",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Code {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Severity> {
        match s.to_ascii_lowercase().as_str() {
            "info" => Some(Severity::Info),
            "warning" | "warn" => Some(Severity::Warning),
            "error" => Some(Severity::Error),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: Code,
    pub severity: Severity,
    pub message: String,
    pub subject: Option<PackageName>,
    pub origin: Option<Origin>,
}

impl Diagnostic {
    pub fn new(code: Code, severity: Severity, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            severity,
            message: message.into(),
            subject: None,
            origin: None,
        }
    }

    pub fn info(code: Code, message: impl Into<String>) -> Self {
        Self::new(code, Severity::Info, message)
    }

    pub fn warning(code: Code, message: impl Into<String>) -> Self {
        Self::new(code, Severity::Warning, message)
    }

    pub fn error(code: Code, message: impl Into<String>) -> Self {
        Self::new(code, Severity::Error, message)
    }

    pub fn with_subject(mut self, subject: PackageName) -> Self {
        self.subject = Some(subject);
        self
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn subject_str(&self) -> &str {
        self.subject.as_ref().map(|s| s.as_str()).unwrap_or("-")
    }

    /// Ordering used by every report: code, then subject, then the rest.
    pub fn sort_key(&self) -> (Code, String, String, Severity, Option<Origin>) {
        (
            self.code,
            self.subject_str().to_string(),
            self.message.clone(),
            self.severity,
            self.origin.clone(),
        )
    }
}

/// Sort and remove exact duplicates.
pub fn normalize(diags: &mut Vec<Diagnostic>) {
    diags.sort_by_key(|d| d.sort_key());
    diags.dedup();
}
