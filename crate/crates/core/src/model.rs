//! Shared domain types: package names, sources, dependency groups and the
//! declared / locked / resolved views of a dependency.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::version::{Version, VersionSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("package name is empty")]
    Empty,
    #[error("invalid character {found:?} in package name {raw:?}")]
    InvalidCharacter { raw: String, found: char },
    #[error("package name {0:?} must start and end with a letter or digit")]
    BadBoundary(String),
}

/// A package name as written, together with its normalized form.
///
/// Normalization lowercases the name and collapses every run of `-`, `_`
/// and `.` into a single `-`, so `My_Pkg.name` and `my-pkg-name` compare
/// equal. Equality, ordering and hashing use the normalized form only.
#[derive(Debug, Clone)]
pub struct PackageName {
    raw: String,
    normalized: String,
}

impl PackageName {
    pub fn new(raw: &str) -> Result<Self, NameError> {
        normalize_name(raw)
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }

    pub fn as_str(&self) -> &str {
        &self.normalized
    }
}

/// Normalize a raw package name.
pub fn normalize_name(raw: &str) -> Result<PackageName, NameError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(NameError::Empty);
    }
    if let Some(found) = trimmed
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')))
    {
        return Err(NameError::InvalidCharacter {
            raw: raw.to_string(),
            found,
        });
    }
    let first = trimmed.chars().next().unwrap_or('-');
    let last = trimmed.chars().last().unwrap_or('-');
    if !first.is_ascii_alphanumeric() || !last.is_ascii_alphanumeric() {
        return Err(NameError::BadBoundary(raw.to_string()));
    }
    let mut normalized = String::with_capacity(trimmed.len());
    let mut in_separator = false;
    for c in trimmed.chars() {
        if matches!(c, '.' | '_' | '-') {
            if !in_separator {
                normalized.push('-');
            }
            in_separator = true;
        } else {
            normalized.push(c.to_ascii_lowercase());
            in_separator = false;
        }
    }
    Ok(PackageName {
        raw: trimmed.to_string(),
        normalized,
    })
}

impl PartialEq for PackageName {
    fn eq(&self, other: &Self) -> bool {
        self.normalized == other.normalized
    }
}

impl Eq for PackageName {}

impl std::hash::Hash for PackageName {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.normalized.hash(state);
    }
}

impl PartialOrd for PackageName {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PackageName {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.normalized.cmp(&other.normalized)
    }
}

impl fmt::Display for PackageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized)
    }
}

impl std::str::FromStr for PackageName {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_name(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Registry,
    Vcs,
    DirectUrl,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VcsType {
    Git,
    Hg,
    Svn,
    Bzr,
}

impl VcsType {
    pub fn as_str(self) -> &'static str {
        match self {
            VcsType::Git => "git",
            VcsType::Hg => "hg",
            VcsType::Svn => "svn",
            VcsType::Bzr => "bzr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "git" => Some(VcsType::Git),
            "hg" => Some(VcsType::Hg),
            "svn" => Some(VcsType::Svn),
            "bzr" => Some(VcsType::Bzr),
            _ => None,
        }
    }
}

impl fmt::Display for VcsType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a dependency comes from.
///
/// For VCS sources `url` holds the repository URL without the `<vcs>+`
/// prefix and without any `@ref` suffix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceRef {
    pub kind: SourceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vcs: Option<VcsType>,
    #[serde(rename = "ref", skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subdirectory: Option<String>,
}

impl SourceRef {
    pub fn registry() -> Self {
        SourceRef {
            kind: SourceKind::Registry,
            url: None,
            vcs: None,
            reference: None,
            subdirectory: None,
        }
    }

    pub fn registry_at(index_url: impl Into<String>) -> Self {
        SourceRef {
            url: Some(index_url.into()),
            ..SourceRef::registry()
        }
    }

    pub fn vcs(vcs: VcsType, url: impl Into<String>, reference: Option<String>) -> Self {
        SourceRef {
            kind: SourceKind::Vcs,
            url: Some(url.into()),
            vcs: Some(vcs),
            reference,
            subdirectory: None,
        }
    }

    pub fn direct_url(url: impl Into<String>) -> Self {
        SourceRef {
            kind: SourceKind::DirectUrl,
            url: Some(url.into()),
            vcs: None,
            reference: None,
            subdirectory: None,
        }
    }

    pub fn path(path: impl Into<String>) -> Self {
        SourceRef {
            kind: SourceKind::Path,
            url: Some(path.into()),
            vcs: None,
            reference: None,
            subdirectory: None,
        }
    }

    pub fn is_registry(&self) -> bool {
        self.kind == SourceKind::Registry
    }

    /// `git+https://host/repo` style URL for VCS sources.
    pub fn vcs_url(&self) -> Option<String> {
        match (self.kind, self.vcs, &self.url) {
            (SourceKind::Vcs, Some(vcs), Some(url)) => Some(format!("{vcs}+{url}")),
            _ => None,
        }
    }
}

/// Which dependency group a declaration or lock entry belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "extra")]
pub enum DependencyGroup {
    Required,
    Optional(String),
    Development,
}

impl DependencyGroup {
    /// Lower is stronger: required beats optional beats development.
    pub fn strength(&self) -> u8 {
        match self {
            DependencyGroup::Required => 0,
            DependencyGroup::Optional(_) => 1,
            DependencyGroup::Development => 2,
        }
    }

    pub fn stronger(self, other: DependencyGroup) -> DependencyGroup {
        if other.strength() < self.strength() {
            other
        } else {
            self
        }
    }

    pub fn label(&self) -> String {
        match self {
            DependencyGroup::Required => "required".to_string(),
            DependencyGroup::Optional(extra) => format!("optional:{extra}"),
            DependencyGroup::Development => "development".to_string(),
        }
    }
}

/// File and line a value was read from. Line is 1-based; 0 when unknown.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub file: PathBuf,
    pub line: usize,
}

impl Origin {
    pub fn new(file: impl Into<PathBuf>, line: usize) -> Self {
        Origin {
            file: file.into(),
            line,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "{}:{}", self.file.display(), self.line)
        } else {
            write!(f, "{}", self.file.display())
        }
    }
}

/// A dependency as written in a metadata file.
///
/// An empty `spec` means the dependency is unversioned. It is kept, never
/// dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclaredDependency {
    pub name: PackageName,
    pub extras: BTreeSet<String>,
    pub spec: VersionSpec,
    pub source: SourceRef,
    pub group: DependencyGroup,
    pub marker: Option<String>,
    pub origin: Origin,
}

impl DeclaredDependency {
    pub fn is_unversioned(&self) -> bool {
        self.spec.is_empty()
    }
}

/// Digest of a distribution file, as recorded by a lockfile.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileHash {
    pub algorithm: String,
    pub digest: String,
}

impl FileHash {
    /// Parse `sha256:<hex>`; the digest must be lowercase hex of the
    /// algorithm's length.
    pub fn parse(text: &str) -> Option<FileHash> {
        let (alg, digest) = text.trim().split_once(':')?;
        let alg = alg.to_ascii_lowercase();
        let expected_len = match alg.as_str() {
            "md5" => 32,
            "sha1" => 40,
            "sha256" => 64,
            "sha384" => 96,
            "sha512" => 128,
            _ => return None,
        };
        let digest = digest.to_ascii_lowercase();
        if digest.len() != expected_len || !digest.chars().all(|c| c.is_ascii_hexdigit()) {
            return None;
        }
        Some(FileHash {
            algorithm: alg,
            digest,
        })
    }
}

/// An exact entry from a lockfile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockedPackage {
    pub name: PackageName,
    pub version: Option<Version>,
    pub hashes: Vec<FileHash>,
    pub source: SourceRef,
    pub group: DependencyGroup,
    /// Names this entry depends on; empty when the dialect does not record them.
    pub dependencies: Vec<PackageName>,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Required,
    Optional,
    ExcludedDev,
}

impl Scope {
    pub fn from_group(group: &DependencyGroup) -> Scope {
        match group {
            DependencyGroup::Required => Scope::Required,
            DependencyGroup::Optional(_) => Scope::Optional,
            DependencyGroup::Development => Scope::ExcludedDev,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Required => "required",
            Scope::Optional => "optional",
            Scope::ExcludedDev => "excluded-dev",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reach {
    Direct,
    Transitive,
}

impl Reach {
    pub fn as_str(self) -> &'static str {
        match self {
            Reach::Direct => "direct",
            Reach::Transitive => "transitive",
        }
    }
}

/// How a component's version was determined.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resolution {
    Locked,
    Pinned,
    /// `as_of` is true when `at` is a requested snapshot time rather than
    /// the wall clock at resolution.
    Resolved { at: DateTime<Utc>, as_of: bool },
    Guessed,
    Unknown,
}

impl Resolution {
    pub fn label(&self) -> &'static str {
        match self {
            Resolution::Locked => "locked",
            Resolution::Pinned => "pinned",
            Resolution::Resolved { .. } => "resolved",
            Resolution::Guessed => "guessed",
            Resolution::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Resolved { at, .. } => {
                write!(f, "resolved@{}", at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
            }
            other => f.write_str(other.label()),
        }
    }
}

/// A final SBOM entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedComponent {
    pub name: PackageName,
    pub version: Option<Version>,
    pub source: SourceRef,
    pub purl: String,
    pub scope: Scope,
    pub reach: Reach,
    pub resolution: Resolution,
    pub hashes: Vec<FileHash>,
    pub origin: Option<Origin>,
}

impl ResolvedComponent {
    /// Build a component and derive its purl from the other fields.
    pub fn new(
        name: PackageName,
        version: Option<Version>,
        source: SourceRef,
        scope: Scope,
        reach: Reach,
        resolution: Resolution,
    ) -> Self {
        let purl = crate::purl::purl_for(&name, version.as_ref(), &source);
        ResolvedComponent {
            name,
            version,
            source,
            purl,
            scope,
            reach,
            resolution,
            hashes: Vec::new(),
            origin: None,
        }
    }
}
