//! Requirement strings: `name[extras] (spec | @ url) ; marker`.
//!
//! The legacy parenthesized form `name (>=1.0)` found in older package
//! metadata is accepted as well.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::{
    normalize_name, DeclaredDependency, DependencyGroup, NameError, Origin, PackageName, SourceRef,
};
use crate::parsers::vcs::{is_vcs_url, parse_vcs_url};
use crate::version::{parse_specifier_set, VersionError, VersionSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Requirement {
    pub name: PackageName,
    pub extras: BTreeSet<String>,
    pub spec: VersionSpec,
    pub url: Option<String>,
    pub marker: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequirementError {
    #[error("empty requirement")]
    Empty,
    #[error("invalid project name: {0}")]
    Name(#[from] NameError),
    #[error("unterminated extras list in {0:?}")]
    Extras(String),
    #[error("bad version specifier: {0}")]
    Spec(#[from] VersionError),
    #[error("missing URL after `@` in {0:?}")]
    MissingUrl(String),
    #[error("unexpected text {rest:?} after requirement {text:?}")]
    Trailing { text: String, rest: String },
}

impl RequirementError {
    pub fn code(&self) -> crate::diagnostics::Code {
        match self {
            RequirementError::Spec(e) => e.code(),
            _ => crate::diagnostics::Code::ParseError,
        }
    }
}

impl Requirement {
    /// Source implied by the URL, or the default registry.
    pub fn source(&self) -> SourceRef {
        match &self.url {
            None => SourceRef::registry(),
            Some(url) => source_for_url(url),
        }
    }

    pub fn into_declared(self, group: DependencyGroup, origin: Origin) -> DeclaredDependency {
        let source = self.source();
        DeclaredDependency {
            name: self.name,
            extras: self.extras,
            spec: self.spec,
            source,
            group,
            marker: self.marker,
            origin,
        }
    }
}

/// Classify a URL from a requirement: VCS, local file, or remote archive.
pub fn source_for_url(url: &str) -> SourceRef {
    if is_vcs_url(url) {
        if let Ok(parsed) = parse_vcs_url(url) {
            return parsed.source;
        }
    }
    if let Some(path) = url.strip_prefix("file://") {
        return SourceRef::path(path);
    }
    SourceRef::direct_url(url)
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name.raw())?;
        if !self.extras.is_empty() {
            let extras: Vec<&str> = self.extras.iter().map(String::as_str).collect();
            write!(f, "[{}]", extras.join(","))?;
        }
        if let Some(url) = &self.url {
            write!(f, " @ {url}")?;
            if self.marker.is_some() {
                f.write_str(" ")?;
            }
        } else {
            write!(f, "{}", self.spec)?;
        }
        if let Some(m) = &self.marker {
            write!(f, "; {m}")?;
        }
        Ok(())
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_')
}

pub fn parse_requirement(text: &str) -> Result<Requirement, RequirementError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(RequirementError::Empty);
    }
    let name_end = text.find(|c: char| !is_name_char(c)).unwrap_or(text.len());
    let name = normalize_name(&text[..name_end])?;
    let mut rest = text[name_end..].trim_start();

    let mut extras = BTreeSet::new();
    if let Some(after) = rest.strip_prefix('[') {
        let close = after
            .find(']')
            .ok_or_else(|| RequirementError::Extras(text.to_string()))?;
        for extra in after[..close].split(',') {
            let extra = extra.trim();
            if !extra.is_empty() {
                extras.insert(normalize_name(extra)?.normalized().to_string());
            }
        }
        rest = after[close + 1..].trim_start();
    }

    let mut url = None;
    let mut spec = VersionSpec::empty();
    if let Some(after) = rest.strip_prefix('@') {
        let after = after.trim_start();
        let end = after.find(char::is_whitespace).unwrap_or(after.len());
        let mut candidate = &after[..end];
        // tolerate `url;marker` without the separating space
        let mut tail = &after[end..];
        if let Some(semi) = candidate.find(';') {
            tail = &after[semi..];
            candidate = &candidate[..semi];
        }
        if candidate.is_empty() {
            return Err(RequirementError::MissingUrl(text.to_string()));
        }
        url = Some(candidate.to_string());
        rest = tail.trim_start();
    } else {
        let end = rest.find(';').unwrap_or(rest.len());
        let mut raw = rest[..end].trim();
        if let Some(inner) = raw.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            raw = inner;
        }
        spec = parse_specifier_set(raw)?;
        rest = &rest[end..];
    }

    let marker = match rest.strip_prefix(';') {
        Some(m) => {
            let m = m.trim();
            (!m.is_empty()).then(|| m.to_string())
        }
        None if rest.trim().is_empty() => None,
        None => {
            return Err(RequirementError::Trailing {
                text: text.to_string(),
                rest: rest.to_string(),
            })
        }
    };

    Ok(Requirement {
        name,
        extras,
        spec,
        url,
        marker,
    })
}
