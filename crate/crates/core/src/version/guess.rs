//! Constraint-to-pin guessing.
//!
//! Some SBOM generators, faced with a range instead of a pin, keep every
//! clause whose operator contains `=`, treat it as `==`, and replace a
//! trailing `.*` with `.0`. The result is frequently not the version an
//! installer would pick, so callers must label it as guessed.

use super::specifier::VersionSpec;
use super::version::Version;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuessOutcome {
    Pinned(Version),
    /// Every clause was `<` or `>`, or the spec was empty.
    NoCandidate,
    /// Surviving clauses named different versions.
    Conflict(Vec<Version>),
}

/// Guessed version, or `None` when there is nothing to guess from or the
/// surviving clauses disagree.
pub fn guess_pin(spec: &VersionSpec) -> Option<Version> {
    match guess_pin_detailed(spec) {
        GuessOutcome::Pinned(v) => Some(v),
        _ => None,
    }
}

pub fn guess_pin_detailed(spec: &VersionSpec) -> GuessOutcome {
    let mut survivors: Vec<Version> = Vec::new();
    for clause in spec.clauses() {
        if !clause.operator().as_str().contains('=') {
            continue;
        }
        let mut v = clause.version().clone();
        if clause.is_wildcard() {
            let mut release = v.release().to_vec();
            release.push(0);
            v = Version::new(release).with_epoch(v.epoch());
        }
        if !survivors.contains(&v) {
            survivors.push(v);
        }
    }
    match survivors.len() {
        0 => GuessOutcome::NoCandidate,
        1 => GuessOutcome::Pinned(survivors.remove(0)),
        _ => GuessOutcome::Conflict(survivors),
    }
}
