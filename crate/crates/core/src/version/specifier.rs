use std::fmt;
use std::str::FromStr;

use super::version::{parse_version, Version};
use super::VersionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Equal,
    NotEqual,
    Compatible,
    LessEqual,
    GreaterEqual,
    Less,
    Greater,
}

impl Operator {
    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Equal => "==",
            Operator::NotEqual => "!=",
            Operator::Compatible => "~=",
            Operator::LessEqual => "<=",
            Operator::GreaterEqual => ">=",
            Operator::Less => "<",
            Operator::Greater => ">",
        }
    }

    /// Split a leading operator off `text`.
    fn strip(text: &str) -> Option<(Operator, &str)> {
        // two-character operators first
        const OPS: [(&str, Operator); 7] = [
            ("==", Operator::Equal),
            ("!=", Operator::NotEqual),
            ("~=", Operator::Compatible),
            ("<=", Operator::LessEqual),
            (">=", Operator::GreaterEqual),
            ("<", Operator::Less),
            (">", Operator::Greater),
        ];
        OPS.iter()
            .find_map(|(s, op)| text.strip_prefix(s).map(|rest| (*op, rest)))
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One `<op><version>[.*]` clause.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    op: Operator,
    version: Version,
    wildcard: bool,
}

impl Clause {
    pub fn new(op: Operator, version: Version, wildcard: bool) -> Result<Clause, VersionError> {
        let text = format!("{}{}{}", op, version, if wildcard { ".*" } else { "" });
        if wildcard {
            if !matches!(op, Operator::Equal | Operator::NotEqual) {
                return Err(VersionError::WildcardNotAllowed(text));
            }
            if version.pre().is_some()
                || version.post().is_some()
                || version.dev().is_some()
                || version.local().is_some()
            {
                return Err(VersionError::Malformed(text));
            }
        }
        if version.local().is_some() && !matches!(op, Operator::Equal | Operator::NotEqual) {
            return Err(VersionError::LocalNotAllowed(text));
        }
        if op == Operator::Compatible && version.release().len() < 2 {
            return Err(VersionError::CompatibleTooShort(text));
        }
        Ok(Clause {
            op,
            version,
            wildcard,
        })
    }

    pub fn operator(&self) -> Operator {
        self.op
    }

    pub fn version(&self) -> &Version {
        &self.version
    }

    pub fn is_wildcard(&self) -> bool {
        self.wildcard
    }

    /// Version literal as text, without the operator or the `.*` suffix.
    pub fn literal(&self) -> String {
        self.version.to_string()
    }

    /// Whether this clause's literal opts the whole set into pre-releases.
    pub fn enables_prereleases(&self) -> bool {
        match self.op {
            Operator::NotEqual => false,
            Operator::Equal if self.wildcard => false,
            _ => self.version.is_prerelease(),
        }
    }

    /// Clause semantics without any pre-release filtering.
    pub fn contains(&self, candidate: &Version) -> bool {
        let spec = &self.version;
        match self.op {
            Operator::Equal => self.equal(candidate),
            Operator::NotEqual => !self.equal(candidate),
            Operator::LessEqual => candidate.public() <= *spec,
            Operator::GreaterEqual => candidate.public() >= *spec,
            Operator::Less => {
                candidate < spec
                    && !(!spec.is_prerelease()
                        && candidate.is_prerelease()
                        && *candidate >= spec.earliest_prerelease())
            }
            Operator::Greater => {
                if candidate <= spec {
                    return false;
                }
                if !spec.is_postrelease()
                    && candidate.is_postrelease()
                    && candidate.without_post_dev_local() == *spec
                {
                    return false;
                }
                !(candidate.local().is_some() && candidate.public() == *spec)
            }
            Operator::Compatible => {
                let prefix = &spec.release()[..spec.release().len() - 1];
                candidate.public() >= *spec && prefix_matches(spec.epoch(), prefix, candidate)
            }
        }
    }

    fn equal(&self, candidate: &Version) -> bool {
        if self.wildcard {
            prefix_matches(self.version.epoch(), self.version.release(), candidate)
        } else if self.version.local().is_some() {
            *candidate == self.version
        } else {
            candidate.public() == self.version
        }
    }
}

/// `==<epoch>!<prefix>.*`: the candidate's release, zero-padded to the
/// prefix length, starts with the prefix.
fn prefix_matches(epoch: u64, prefix: &[u64], candidate: &Version) -> bool {
    if candidate.epoch() != epoch {
        return false;
    }
    let release = candidate.release();
    prefix
        .iter()
        .enumerate()
        .all(|(i, p)| release.get(i).copied().unwrap_or(0) == *p)
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.op, self.version)?;
        if self.wildcard {
            f.write_str(".*")?;
        }
        Ok(())
    }
}

impl FromStr for Clause {
    type Err = VersionError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let trimmed = text.trim();
        if trimmed.starts_with("===") {
            return Err(VersionError::ArbitraryEquality(trimmed.to_string()));
        }
        let (op, rest) =
            Operator::strip(trimmed).ok_or_else(|| VersionError::UnknownOperator(trimmed.to_string()))?;
        let rest = rest.trim();
        if rest.starts_with(['=', '<', '>', '!', '~']) {
            return Err(VersionError::UnknownOperator(trimmed.to_string()));
        }
        let (body, wildcard) = match rest.strip_suffix(".*") {
            Some(body) => (body, true),
            None => (rest, false),
        };
        if wildcard && !matches!(op, Operator::Equal | Operator::NotEqual) {
            return Err(VersionError::WildcardNotAllowed(trimmed.to_string()));
        }
        let version = parse_version(body).map_err(|_| VersionError::Malformed(trimmed.to_string()))?;
        Clause::new(op, version, wildcard)
    }
}

/// A conjunction of clauses. The empty set matches every version.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct VersionSpec {
    clauses: Vec<Clause>,
}

impl VersionSpec {
    pub fn empty() -> Self {
        VersionSpec::default()
    }

    pub fn from_clauses(clauses: Vec<Clause>) -> Self {
        VersionSpec { clauses }
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Conjunction of both sets; duplicate clauses are kept once.
    pub fn intersect(&self, other: &VersionSpec) -> VersionSpec {
        let mut clauses = self.clauses.clone();
        for c in &other.clauses {
            if !clauses.contains(c) {
                clauses.push(c.clone());
            }
        }
        VersionSpec { clauses }
    }

    /// `==X` with no wildcard and nothing else: the exact pinned version.
    pub fn pinned_version(&self) -> Option<&Version> {
        match self.clauses.as_slice() {
            [c] if c.op == Operator::Equal && !c.wildcard => Some(&c.version),
            _ => None,
        }
    }

    pub fn allows_prereleases(&self) -> bool {
        self.clauses.iter().any(Clause::enables_prereleases)
    }

    /// Every clause holds; pre-release candidates are rejected unless
    /// `prereleases` is set.
    pub fn contains(&self, candidate: &Version, prereleases: bool) -> bool {
        if candidate.is_prerelease() && !prereleases {
            return false;
        }
        self.clauses.iter().all(|c| c.contains(candidate))
    }
}

impl fmt::Display for VersionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for VersionSpec {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_specifier_set(s)
    }
}

/// Parse a comma-separated specifier set. Whitespace around clauses and
/// operators is ignored; an all-blank string is the empty set.
pub fn parse_specifier_set(text: &str) -> Result<VersionSpec, VersionError> {
    if text.trim().is_empty() {
        return Ok(VersionSpec::empty());
    }
    let clauses = text
        .split(',')
        .map(|part| {
            if part.trim().is_empty() {
                Err(VersionError::EmptyClause(text.to_string()))
            } else {
                part.parse::<Clause>()
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VersionSpec { clauses })
}

/// Whether `v` satisfies `spec`.
///
/// Pre-releases match only when a clause literal is itself a pre-release.
/// The empty spec matches everything.
pub fn matches(spec: &VersionSpec, v: &Version) -> bool {
    if spec.is_empty() {
        return true;
    }
    spec.contains(v, spec.allows_prereleases())
}

/// Outcome of choosing among candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub version: Version,
    /// True when a pre-release was taken only because no final release
    /// matched.
    pub prerelease_fallback: bool,
}

impl Selection {
    fn pick(
        candidates: &[Version],
        spec: &VersionSpec,
        allow_prerelease: bool,
    ) -> Option<Selection> {
        let allow = allow_prerelease || spec.allows_prereleases();
        let mut best_final: Option<&Version> = None;
        let mut best_any: Option<&Version> = None;
        for c in candidates.iter().filter(|c| spec.contains(c, true)) {
            if !c.is_prerelease() && best_final.is_none_or(|b| c > b) {
                best_final = Some(c);
            }
            if best_any.is_none_or(|b| c > b) {
                best_any = Some(c);
            }
        }
        match (allow, best_final, best_any) {
            (true, _, Some(v)) => Some(Selection {
                version: v.clone(),
                prerelease_fallback: false,
            }),
            (false, Some(v), _) => Some(Selection {
                version: v.clone(),
                prerelease_fallback: false,
            }),
            (false, None, Some(v)) => Some(Selection {
                version: v.clone(),
                prerelease_fallback: true,
            }),
            (_, _, None) => None,
        }
    }

    pub fn choose(
        candidates: &[Version],
        spec: &VersionSpec,
        allow_prerelease: bool,
    ) -> Option<Selection> {
        Self::pick(candidates, spec, allow_prerelease)
    }
}

/// Largest candidate satisfying `spec`. Pre-releases are considered only
/// when allowed (by the flag or by a pre-release literal in the spec) or
/// when no final release matches.
pub fn max_satisfying(
    candidates: &[Version],
    spec: &VersionSpec,
    allow_prerelease: bool,
) -> Option<Version> {
    Selection::choose(candidates, spec, allow_prerelease).map(|s| s.version)
}
