//! From a parsed project to one realized component set: lock entries,
//! pins, index resolution for unpinned declarations, and transitive
//! expansion over `requires_dist`.

mod index;
mod marker;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::diagnostics::{self, Code, Diagnostic};
use crate::model::{
    DeclaredDependency, DependencyGroup, FileHash, LockedPackage, Origin, PackageName, Reach,
    Resolution, ResolvedComponent, Scope, SourceKind, SourceRef,
};
use crate::parsers::{archive_name_version, ProjectModel};
use crate::requirement::parse_requirement;
use crate::version::{guess_pin_detailed, GuessOutcome, Selection, Version, VersionSpec};

pub use index::{
    index_key, trim_project_json, DiskCache, HttpIndex, IndexClient, IndexError, Release,
    ReleaseIndex, StaticIndex, DEFAULT_INDEX_URL,
};
pub use marker::{evaluate_marker, MarkerEnv, MarkerOutcome};

/// Dependency edge, parent → child.
pub type Edge = (PackageName, PackageName);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Lock,
    Resolve,
    Guess,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Lock => "lock",
            Strategy::Resolve => "resolve",
            Strategy::Guess => "guess",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "lock" => Ok(Strategy::Lock),
            "resolve" => Ok(Strategy::Resolve),
            "guess" => Ok(Strategy::Guess),
            other => Err(PolicyError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("strategy order is empty")]
    EmptyStrategy,
    #[error("strategy {0} listed twice")]
    DuplicateStrategy(Strategy),
    #[error("unknown strategy {0:?}; expected lock, resolve or guess")]
    UnknownStrategy(String),
}

/// Parse `lock,resolve,guess`.
pub fn parse_strategy_order(text: &str) -> Result<Vec<Strategy>, PolicyError> {
    let order = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Strategy::from_str)
        .collect::<Result<Vec<_>, _>>()?;
    validate_order(&order)?;
    Ok(order)
}

fn validate_order(order: &[Strategy]) -> Result<(), PolicyError> {
    if order.is_empty() {
        return Err(PolicyError::EmptyStrategy);
    }
    for (i, s) in order.iter().enumerate() {
        if order[..i].contains(s) {
            return Err(PolicyError::DuplicateStrategy(*s));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolutionPolicy {
    strategy_order: Vec<Strategy>,
    pub as_of: Option<DateTime<Utc>>,
    pub allow_prerelease: bool,
    pub include_optional: bool,
    pub include_dev: bool,
    pub offline: bool,
    /// Environment for markers and `requires_python` checks.
    pub env: MarkerEnv,
}

impl ResolutionPolicy {
    pub fn new(strategy_order: Vec<Strategy>, python_version: &str) -> Result<Self, PolicyError> {
        validate_order(&strategy_order)?;
        Ok(ResolutionPolicy {
            strategy_order,
            as_of: None,
            allow_prerelease: false,
            include_optional: false,
            include_dev: false,
            offline: false,
            env: MarkerEnv::linux_cpython(python_version),
        })
    }

    pub fn strategy_order(&self) -> &[Strategy] {
        &self.strategy_order
    }

    fn uses(&self, s: Strategy) -> bool {
        self.strategy_order.contains(&s)
    }

    fn includes(&self, group: &DependencyGroup) -> bool {
        match group {
            DependencyGroup::Required => true,
            DependencyGroup::Optional(_) => self.include_optional,
            DependencyGroup::Development => self.include_dev,
        }
    }

    fn python_full_version(&self) -> Option<Version> {
        let full = self
            .env
            .vars
            .get("python_full_version")
            .cloned()
            .unwrap_or_else(|| self.env.python_version.clone());
        full.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("{name}: no release satisfies {spec:?} ({considered} of {total} releases eligible after yanked, requires_python and as-of filtering)")]
    NoCandidate {
        name: String,
        spec: String,
        considered: usize,
        total: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedVersion {
    pub version: Version,
    pub resolution: Resolution,
    /// A pre-release was taken because no final release matched.
    pub prerelease_fallback: bool,
}

/// Pick the newest release of `idx` that satisfies `d.spec`, skipping
/// yanked releases, releases whose `requires_python` excludes the target
/// interpreter and, with `as_of`, releases uploaded after it.
pub fn resolve_version(
    d: &DeclaredDependency,
    idx: &ReleaseIndex,
    policy: &ResolutionPolicy,
) -> Result<ResolvedVersion, ResolveError> {
    resolve_spec(&d.name, &d.spec, idx, policy, Utc::now())
}

fn resolve_spec(
    name: &PackageName,
    spec: &VersionSpec,
    idx: &ReleaseIndex,
    policy: &ResolutionPolicy,
    now: DateTime<Utc>,
) -> Result<ResolvedVersion, ResolveError> {
    let python = policy.python_full_version();
    let candidates: Vec<Version> = idx
        .releases
        .iter()
        .filter(|r| !r.yanked)
        .filter(|r| match (&r.requires_python, &python) {
            (Some(rp), Some(py)) => rp.contains(py, true),
            _ => true,
        })
        .filter(|r| match policy.as_of {
            Some(t) => r.uploaded.is_some_and(|u| u <= t),
            None => true,
        })
        .map(|r| r.version.clone())
        .collect();
    let selection = Selection::choose(&candidates, spec, policy.allow_prerelease).ok_or_else(|| {
        ResolveError::NoCandidate {
            name: name.to_string(),
            spec: spec.to_string(),
            considered: candidates.len(),
            total: idx.releases.len(),
        }
    })?;
    Ok(ResolvedVersion {
        version: selection.version,
        resolution: Resolution::Resolved {
            at: policy.as_of.unwrap_or(now),
            as_of: policy.as_of.is_some(),
        },
        prerelease_fallback: selection.prerelease_fallback,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedProject {
    /// Sorted by name.
    pub components: Vec<ResolvedComponent>,
    pub edges: BTreeSet<Edge>,
    pub diagnostics: Vec<Diagnostic>,
}

/// A declaration after merging every entry for the same name.
#[derive(Debug, Clone)]
struct Direct {
    name: PackageName,
    spec: VersionSpec,
    source: SourceRef,
    group: DependencyGroup,
    extras: BTreeSet<String>,
    origin: Origin,
}

/// Working state of one component while resolving.
#[derive(Debug, Clone)]
struct Node {
    version: Option<Version>,
    source: SourceRef,
    resolution: Resolution,
    reach: Reach,
    scope: Scope,
    hashes: Vec<FileHash>,
    origin: Option<Origin>,
    extras_expanded: BTreeSet<String>,
    from_lock: bool,
}

impl Node {
    fn into_component(self, name: PackageName) -> ResolvedComponent {
        let mut c = ResolvedComponent::new(name, self.version, self.source, self.scope, self.reach, self.resolution);
        c.hashes = self.hashes;
        c.origin = self.origin;
        c
    }
}

fn scope_for(group: &DependencyGroup) -> Scope {
    Scope::from_group(group)
}

fn stronger_scope(a: Scope, b: Scope) -> Scope {
    a.min(b)
}

/// Turn the project model into components, edges and diagnostics.
pub fn resolve_project(
    model: &ProjectModel,
    policy: &ResolutionPolicy,
    client: &dyn IndexClient,
) -> ResolvedProject {
    let now = Utc::now();
    let mut diags: Vec<Diagnostic> = Vec::new();
    let directs = merge_declarations(&model.declared, &policy.env, &mut diags);

    // group filtering
    let mut excluded: BTreeMap<&'static str, Vec<String>> = BTreeMap::new();
    let mut included = Vec::new();
    for d in directs {
        if policy.includes(&d.group) {
            included.push(d);
        } else {
            let kind = match d.group {
                DependencyGroup::Development => "development",
                _ => "optional",
            };
            excluded.entry(kind).or_default().push(d.name.to_string());
        }
    }

    // lock entries, first lockfile wins for duplicate names
    let use_lock = policy.uses(Strategy::Lock);
    let mut lock: BTreeMap<PackageName, &LockedPackage> = BTreeMap::new();
    if use_lock {
        for p in &model.locked {
            lock.entry(p.name.clone()).or_insert(p);
        }
    } else if !model.locked.is_empty() {
        diags.push(Diagnostic::info(
            Code::T2,
            "lockfile present but the lock strategy is not enabled; it was not used",
        ));
    }

    let mut nodes: BTreeMap<PackageName, Node> = BTreeMap::new();
    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    let mut expand_roots: Vec<(PackageName, BTreeSet<String>)> = Vec::new();
    let mut index_cache: BTreeMap<PackageName, Result<ReleaseIndex, IndexError>> = BTreeMap::new();

    for d in &included {
        let node = resolve_direct(d, policy, client, &lock, &mut index_cache, &mut diags, now);
        if !node.from_lock && node.version.is_some() {
            if node.source.is_registry() {
                expand_roots.push((d.name.clone(), d.extras.clone()));
            } else {
                diags.push(
                    Diagnostic::info(
                        Code::E4,
                        "dependencies of a package outside the index are not expanded; they are only known after building it",
                    )
                    .with_subject(d.name.clone()),
                );
            }
        }
        nodes.insert(d.name.clone(), node);
    }

    // remaining lock entries are transitive
    let mut lock_excluded = Vec::new();
    for (name, p) in &lock {
        if nodes.contains_key(name) {
            continue;
        }
        if !policy.includes(&p.group) {
            lock_excluded.push(name.to_string());
            continue;
        }
        let (version, resolution) = lock_version(p, &mut diags);
        nodes.insert(
            name.clone(),
            Node {
                version,
                source: p.source.clone(),
                resolution,
                reach: Reach::Transitive,
                scope: scope_for(&p.group),
                hashes: p.hashes.clone(),
                origin: Some(p.origin.clone()),
                extras_expanded: BTreeSet::new(),
                from_lock: true,
            },
        );
    }
    // lock edges, markers deliberately not evaluated: the lock records
    // the cross-platform graph
    for (name, p) in &lock {
        if !nodes.get(name).is_some_and(|n| n.from_lock) {
            continue;
        }
        for dep in &p.dependencies {
            if nodes.get(dep).is_some_and(|n| n.from_lock) {
                edges.insert((name.clone(), dep.clone()));
            }
        }
    }

    for (kind, names) in &excluded {
        let flag = if *kind == "development" { "--include-dev" } else { "--include-optional" };
        diags.push(Diagnostic::info(
            Code::ExcludedGroup,
            format!(
                "{} {kind} dependencies excluded by policy ({}); pass {flag} to include them",
                names.len(),
                names.join(", ")
            ),
        ));
    }
    if !lock_excluded.is_empty() {
        diags.push(Diagnostic::info(
            Code::ExcludedGroup,
            format!(
                "{} lockfile entries outside the included groups omitted ({})",
                lock_excluded.len(),
                lock_excluded.join(", ")
            ),
        ));
    }

    // transitive expansion from the index
    if policy.uses(Strategy::Resolve) && !expand_roots.is_empty() {
        expand_transitives(&expand_roots, client, policy, &mut nodes, &mut edges, &mut diags, now);
        diags.push(Diagnostic::info(
            Code::E4,
            "transitive dependencies of components not covered by a lockfile expanded from index metadata",
        ));
    } else if !expand_roots.is_empty() {
        diags.push(Diagnostic::warning(
            Code::E4,
            "resolve strategy disabled: dependencies not covered by a lockfile are listed without their transitive dependencies",
        ));
    }

    propagate_scopes(&mut nodes, &edges);

    let mut components: Vec<ResolvedComponent> = nodes
        .into_iter()
        .map(|(name, node)| node.into_component(name))
        .collect();
    components.sort_by(|a, b| a.name.cmp(&b.name));
    diagnostics::normalize(&mut diags);
    ResolvedProject {
        components,
        edges,
        diagnostics: diags,
    }
}

/// Merge declarations of the same name: markers that evaluate false drop
/// a declaration, the strongest group wins, clauses are intersected, and a
/// non-registry source beats the registry.
fn merge_declarations(
    declared: &[DeclaredDependency],
    env: &MarkerEnv,
    diags: &mut Vec<Diagnostic>,
) -> Vec<Direct> {
    let mut merged: BTreeMap<PackageName, Direct> = BTreeMap::new();
    for d in declared {
        if let Some(m) = &d.marker {
            let out = evaluate_marker(m, &env.with_extras(Vec::new()));
            for w in &out.warnings {
                diags.push(
                    Diagnostic::warning(Code::Marker, format!("{w}; requirement kept"))
                        .with_subject(d.name.clone())
                        .with_origin(d.origin.clone()),
                );
            }
            if !out.value {
                diags.push(
                    Diagnostic::info(
                        Code::Marker,
                        format!("marker {m:?} is false for the target environment; declaration skipped"),
                    )
                    .with_subject(d.name.clone())
                    .with_origin(d.origin.clone()),
                );
                continue;
            }
        }
        match merged.get_mut(&d.name) {
            None => {
                merged.insert(
                    d.name.clone(),
                    Direct {
                        name: d.name.clone(),
                        spec: d.spec.clone(),
                        source: d.source.clone(),
                        group: d.group.clone(),
                        extras: d.extras.clone(),
                        origin: d.origin.clone(),
                    },
                );
            }
            Some(existing) => {
                existing.group = existing.group.clone().stronger(d.group.clone());
                existing.spec = existing.spec.intersect(&d.spec);
                existing.extras.extend(d.extras.iter().cloned());
                if existing.source.is_registry() && !d.source.is_registry() {
                    existing.source = d.source.clone();
                }
            }
        }
    }
    merged.into_values().collect()
}

fn lock_version(p: &LockedPackage, diags: &mut Vec<Diagnostic>) -> (Option<Version>, Resolution) {
    if let Some(v) = &p.version {
        return (Some(v.clone()), Resolution::Locked);
    }
    if p.source.kind == SourceKind::DirectUrl {
        if let Some((_, v)) = p.source.url.as_deref().and_then(archive_name_version) {
            diags.push(
                Diagnostic::info(
                    Code::VersionFromUrl,
                    format!("lockfile has no version for {}; {v} taken from the archive name", p.name),
                )
                .with_subject(p.name.clone())
                .with_origin(p.origin.clone()),
            );
            return (Some(v), Resolution::Locked);
        }
    }
    (None, Resolution::Unknown)
}

fn fetch_project<'a>(
    name: &PackageName,
    client: &dyn IndexClient,
    cache: &'a mut BTreeMap<PackageName, Result<ReleaseIndex, IndexError>>,
) -> &'a Result<ReleaseIndex, IndexError> {
    cache.entry(name.clone()).or_insert_with(|| client.project(name))
}

#[allow(clippy::too_many_arguments)]
fn resolve_direct(
    d: &Direct,
    policy: &ResolutionPolicy,
    client: &dyn IndexClient,
    lock: &BTreeMap<PackageName, &LockedPackage>,
    index_cache: &mut BTreeMap<PackageName, Result<ReleaseIndex, IndexError>>,
    diags: &mut Vec<Diagnostic>,
    now: DateTime<Utc>,
) -> Node {
    let mut node = Node {
        version: None,
        source: d.source.clone(),
        resolution: Resolution::Unknown,
        reach: Reach::Direct,
        scope: scope_for(&d.group),
        hashes: Vec::new(),
        origin: Some(d.origin.clone()),
        extras_expanded: BTreeSet::new(),
        from_lock: false,
    };
    let subject = |diag: Diagnostic| diag.with_subject(d.name.clone()).with_origin(d.origin.clone());
    let mut failure: Option<Diagnostic> = None;

    for strategy in policy.strategy_order() {
        match strategy {
            Strategy::Lock => {
                let Some(p) = lock.get(&d.name) else { continue };
                let (version, resolution) = lock_version(p, diags);
                node.version = version;
                node.resolution = resolution;
                if !p.source.is_registry() || d.source.is_registry() {
                    node.source = p.source.clone();
                }
                node.hashes = p.hashes.clone();
                node.from_lock = true;
                if let Some(v) = &node.version {
                    if !d.spec.is_empty() && !d.spec.contains(v, true) {
                        diags.push(subject(Diagnostic::warning(
                            Code::VersionConflict,
                            format!("locked {v} does not satisfy declared {}", d.spec),
                        )));
                    }
                }
                return node;
            }
            Strategy::Resolve => match d.source.kind {
                SourceKind::DirectUrl => {
                    if let Some((_, v)) = d.source.url.as_deref().and_then(archive_name_version) {
                        diags.push(subject(Diagnostic::info(
                            Code::VersionFromUrl,
                            format!("version {v} taken from the archive name"),
                        )));
                        node.version = Some(v);
                        node.resolution = Resolution::Pinned;
                        return node;
                    }
                }
                SourceKind::Vcs | SourceKind::Path => {}
                SourceKind::Registry => {
                    if let Some(v) = d.spec.pinned_version() {
                        node.version = Some(v.clone());
                        node.resolution = Resolution::Pinned;
                        return node;
                    }
                    match fetch_project(&d.name, client, index_cache) {
                        Ok(idx) => match resolve_spec(&d.name, &d.spec, idx, policy, now) {
                            Ok(r) => {
                                if r.prerelease_fallback {
                                    diags.push(subject(Diagnostic::info(
                                        Code::Prerelease,
                                        format!("pre-release {} selected: no final release satisfies {:?}", r.version, d.spec.to_string()),
                                    )));
                                }
                                node.version = Some(r.version);
                                node.resolution = r.resolution;
                                return node;
                            }
                            Err(e) => failure = Some(Diagnostic::warning(Code::Unresolved, e.to_string())),
                        },
                        Err(e) => failure = Some(Diagnostic::warning(Code::Unresolved, e.to_string())),
                    }
                }
            },
            Strategy::Guess => match guess_pin_detailed(&d.spec) {
                GuessOutcome::Pinned(v) => {
                    diags.push(subject(Diagnostic::warning(
                        Code::T6,
                        format!("version {v} guessed from constraint {:?}; it may differ from what an installer picks", d.spec.to_string()),
                    )));
                    node.version = Some(v);
                    node.resolution = Resolution::Guessed;
                    return node;
                }
                GuessOutcome::Conflict(vs) => {
                    let listed: Vec<String> = vs.iter().map(Version::to_string).collect();
                    diags.push(subject(Diagnostic::warning(
                        Code::GuessConflict,
                        format!("constraint {:?} yields conflicting guesses {}", d.spec.to_string(), listed.join(", ")),
                    )));
                }
                GuessOutcome::NoCandidate => {}
            },
        }
    }

    // an exact pin needs no strategy
    if let Some(v) = d.spec.pinned_version().filter(|_| d.source.is_registry()) {
        node.version = Some(v.clone());
        node.resolution = Resolution::Pinned;
        return node;
    }
    if let Some(f) = failure {
        diags.push(subject(f));
    }
    if !d.source.is_registry() {
        let diag = match &d.source.reference {
            Some(r) if d.source.kind == SourceKind::Vcs => Diagnostic::info(
                Code::T5,
                format!("identified by commit {r}; no version without building the checkout"),
            ),
            _ => Diagnostic::warning(
                Code::T5,
                "non-index source without a version or commit; the exact artifact is not identified",
            ),
        };
        diags.push(subject(diag));
    } else if d.spec.is_empty() {
        diags.push(subject(Diagnostic::warning(
            Code::T3,
            "declared without a version and not resolved; kept with an unknown version",
        )));
    } else {
        diags.push(subject(Diagnostic::warning(
            Code::Unresolved,
            format!("constraint {:?} not resolved; kept with an unknown version", d.spec.to_string()),
        )));
    }
    node
}

/// Outcome of resolving and fetching one pending package.
struct Fetched {
    version: Result<(Version, Resolution, bool), String>,
    requires: Result<Vec<String>, String>,
}

#[derive(Debug, Clone)]
struct Pending {
    name: PackageName,
    /// Set when the version is already known (roots, re-expansion).
    fixed: Option<Version>,
    spec: VersionSpec,
    extras: BTreeSet<String>,
    source: SourceRef,
    parent: Option<PackageName>,
    /// Further requirement specs seen before resolution, checked after.
    also: Vec<(PackageName, VersionSpec)>,
}

fn fetch_pending(p: &Pending, client: &dyn IndexClient, policy: &ResolutionPolicy, now: DateTime<Utc>) -> Fetched {
    let version = match &p.fixed {
        Some(v) => Ok((v.clone(), Resolution::Pinned, false)),
        None => client
            .project(&p.name)
            .map_err(|e| e.to_string())
            .and_then(|idx| {
                resolve_spec(&p.name, &p.spec, &idx, policy, now)
                    .map(|r| (r.version, r.resolution, r.prerelease_fallback))
                    .map_err(|e| e.to_string())
            }),
    };
    let requires = match &version {
        Ok((v, _, _)) => client.requires_dist(&p.name, v).map_err(|e| e.to_string()),
        Err(e) => Err(e.clone()),
    };
    Fetched { version, requires }
}

const FETCH_WORKERS: usize = 8;

/// Breadth-first closure over `requires_dist`. Each level is fetched
/// concurrently and then processed in name order, so the result does not
/// depend on fetch timing. The first version found for a name is kept.
fn expand_transitives(
    roots: &[(PackageName, BTreeSet<String>)],
    client: &dyn IndexClient,
    policy: &ResolutionPolicy,
    nodes: &mut BTreeMap<PackageName, Node>,
    edges: &mut BTreeSet<Edge>,
    diags: &mut Vec<Diagnostic>,
    now: DateTime<Utc>,
) {
    let mut frontier: Vec<Pending> = roots
        .iter()
        .filter_map(|(name, extras)| {
            let node = nodes.get(name)?;
            Some(Pending {
                name: name.clone(),
                fixed: node.version.clone(),
                spec: VersionSpec::empty(),
                extras: extras.clone(),
                source: node.source.clone(),
                parent: None,
                also: Vec::new(),
            })
        })
        .collect();

    while !frontier.is_empty() {
        frontier.sort_by(|a, b| a.name.cmp(&b.name));
        let fetched: Vec<Fetched> = fetch_level(&frontier, client, policy, now);
        let mut next: BTreeMap<PackageName, Pending> = BTreeMap::new();

        for (p, f) in frontier.into_iter().zip(fetched) {
            let is_new = !nodes.contains_key(&p.name);
            if is_new {
                let mut node = Node {
                    version: None,
                    source: p.source.clone(),
                    resolution: Resolution::Unknown,
                    reach: Reach::Transitive,
                    scope: Scope::ExcludedDev,
                    hashes: Vec::new(),
                    origin: None,
                    extras_expanded: BTreeSet::new(),
                    from_lock: false,
                };
                match &f.version {
                    Ok((v, resolution, pre)) => {
                        if *pre {
                            diags.push(
                                Diagnostic::info(Code::Prerelease, format!("pre-release {v} selected: no final release satisfies {:?}", p.spec.to_string()))
                                    .with_subject(p.name.clone()),
                            );
                        }
                        node.version = Some(v.clone());
                        node.resolution = resolution.clone();
                        for (who, spec) in &p.also {
                            if !spec.contains(v, true) {
                                diags.push(
                                    Diagnostic::warning(
                                        Code::VersionConflict,
                                        format!("{who} requires {}{spec} but {v} was chosen first", p.name),
                                    )
                                    .with_subject(p.name.clone()),
                                );
                            }
                        }
                    }
                    Err(e) => diags.push(
                        Diagnostic::warning(Code::Unresolved, format!("transitive dependency not resolved: {e}"))
                            .with_subject(p.name.clone()),
                    ),
                }
                nodes.insert(p.name.clone(), node);
            }
            if let Some(parent) = &p.parent {
                edges.insert((parent.clone(), p.name.clone()));
            }

            let requires = match f.requires {
                Ok(r) => r,
                Err(e) => {
                    if f.version.is_ok() {
                        diags.push(
                            Diagnostic::warning(Code::Unresolved, format!("dependencies of {} unknown: {e}", p.name))
                                .with_subject(p.name.clone()),
                        );
                    }
                    continue;
                }
            };
            let node = nodes.get_mut(&p.name).expect("inserted above");
            let already: BTreeSet<String> = node.extras_expanded.clone();
            node.extras_expanded.extend(p.extras.iter().cloned());
            node.extras_expanded.insert(String::new());
            let env = policy.env.with_extras(p.extras.iter().cloned());
            let base_env = policy.env.with_extras(already.iter().filter(|e| !e.is_empty()).cloned());
            let first_pass = !already.contains("");

            for text in requires {
                let req = match parse_requirement(&text) {
                    Ok(r) => r,
                    Err(e) => {
                        diags.push(
                            Diagnostic::warning(Code::ParseError, format!("requirement {text:?} of {}: {e}", p.name))
                                .with_subject(p.name.clone()),
                        );
                        continue;
                    }
                };
                let active = match &req.marker {
                    None => true,
                    Some(m) => {
                        let out = evaluate_marker(m, &env);
                        for w in &out.warnings {
                            diags.push(
                                Diagnostic::warning(Code::Marker, format!("{w} in {text:?}; requirement kept"))
                                    .with_subject(p.name.clone()),
                            );
                        }
                        out.value
                    }
                };
                if !active {
                    continue;
                }
                // on re-expansion for new extras, skip what the earlier
                // pass already handled
                if !first_pass {
                    let before = req.marker.as_ref().map(|m| evaluate_marker(m, &base_env).value).unwrap_or(true);
                    if before {
                        continue;
                    }
                }
                let child = req.name.clone();
                if child == p.name {
                    continue;
                }
                if let Some(existing) = nodes.get(&child) {
                    edges.insert((p.name.clone(), child.clone()));
                    if let Some(v) = &existing.version {
                        if !req.spec.is_empty() && !req.spec.contains(v, true) {
                            diags.push(
                                Diagnostic::warning(
                                    Code::VersionConflict,
                                    format!("{} requires {child}{} but {v} was chosen first", p.name, req.spec),
                                )
                                .with_subject(child.clone()),
                            );
                        }
                    }
                    let new_extras: BTreeSet<String> =
                        req.extras.difference(&existing.extras_expanded).cloned().collect();
                    if !new_extras.is_empty() && existing.version.is_some() && !existing.from_lock {
                        next.entry(child.clone()).or_insert_with(|| Pending {
                            name: child.clone(),
                            fixed: existing.version.clone(),
                            spec: VersionSpec::empty(),
                            extras: BTreeSet::new(),
                            source: existing.source.clone(),
                            parent: None,
                            also: Vec::new(),
                        })
                        .extras
                        .extend(req.extras.iter().cloned().chain(existing.extras_expanded.iter().filter(|e| !e.is_empty()).cloned()));
                    }
                    continue;
                }
                match next.get_mut(&child) {
                    Some(pending) => {
                        pending.extras.extend(req.extras.iter().cloned());
                        pending.also.push((p.name.clone(), req.spec.clone()));
                        edges.insert((p.name.clone(), child.clone()));
                    }
                    None => {
                        let source = req.source();
                        let fixed = match source.kind {
                            SourceKind::DirectUrl => source.url.as_deref().and_then(archive_name_version).map(|(_, v)| v),
                            _ => None,
                        };
                        next.insert(
                            child.clone(),
                            Pending {
                                name: child.clone(),
                                fixed,
                                spec: req.spec.clone(),
                                extras: req.extras.clone(),
                                source,
                                parent: Some(p.name.clone()),
                                also: Vec::new(),
                            },
                        );
                    }
                }
            }
        }
        frontier = next.into_values().collect();
    }
}

fn fetch_level(items: &[Pending], client: &dyn IndexClient, policy: &ResolutionPolicy, now: DateTime<Utc>) -> Vec<Fetched> {
    if items.len() <= 1 {
        return items.iter().map(|p| fetch_pending(p, client, policy, now)).collect();
    }
    let mut out: Vec<Option<Fetched>> = (0..items.len()).map(|_| None).collect();
    for (chunk_items, chunk_out) in items.chunks(FETCH_WORKERS).zip(out.chunks_mut(FETCH_WORKERS)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_items
                .iter()
                .map(|p| s.spawn(move || fetch_pending(p, client, policy, now)))
                .collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(h.join().unwrap_or_else(|_| Fetched {
                    version: Err("index worker panicked".to_string()),
                    requires: Err("index worker panicked".to_string()),
                }));
            }
        });
    }
    out.into_iter().map(|f| f.expect("every slot filled")).collect()
}

/// Index-expanded transitives take the strongest scope of any direct
/// component that reaches them.
fn propagate_scopes(nodes: &mut BTreeMap<PackageName, Node>, edges: &BTreeSet<Edge>) {
    let mut children: BTreeMap<&PackageName, Vec<&PackageName>> = BTreeMap::new();
    for (a, b) in edges {
        children.entry(a).or_default().push(b);
    }
    let mut best: BTreeMap<PackageName, Scope> = BTreeMap::new();
    let directs: Vec<(PackageName, Scope)> = nodes
        .iter()
        .filter(|(_, n)| n.reach == Reach::Direct)
        .map(|(k, n)| (k.clone(), n.scope))
        .collect();
    for (root, scope) in directs {
        let mut stack = vec![&root];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n.clone()) {
                continue;
            }
            for c in children.get(n).into_iter().flatten() {
                let e = best.entry((*c).clone()).or_insert(scope);
                *e = stronger_scope(*e, scope);
                stack.push(c);
            }
        }
    }
    for (name, node) in nodes.iter_mut() {
        if node.reach == Reach::Transitive && !node.from_lock {
            if let Some(s) = best.get(name) {
                node.scope = *s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::normalize_name;
    use crate::parsers::{DiscoveredFiles, ProjectModel};
    use crate::version::parse_specifier_set;

    fn name(s: &str) -> PackageName {
        normalize_name(s).unwrap()
    }

    fn decl(n: &str, spec: &str) -> DeclaredDependency {
        DeclaredDependency {
            name: name(n),
            extras: BTreeSet::new(),
            spec: parse_specifier_set(spec).unwrap(),
            source: SourceRef::registry(),
            group: DependencyGroup::Required,
            marker: None,
            origin: Origin::new("requirements.txt", 1),
        }
    }

    fn model(declared: Vec<DeclaredDependency>, locked: Vec<LockedPackage>) -> ProjectModel {
        ProjectModel {
            root: ".".into(),
            files: DiscoveredFiles::default(),
            declared,
            locked_dialects: Vec::new(),
            locked,
            frontend_hint: None,
            diagnostics: Vec::new(),
        }
    }

    fn policy(order: &str) -> ResolutionPolicy {
        ResolutionPolicy::new(parse_strategy_order(order).unwrap(), "3.11").unwrap()
    }

    fn at(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    fn two_releases() -> StaticIndex {
        StaticIndex::new()
            .release("urllib3", "2.2.0", "2024-01-30T00:00:00Z", &[])
            .release("urllib3", "2.2.1", "2024-02-18T00:00:00Z", &[])
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(parse_strategy_order("lock,resolve").unwrap(), [Strategy::Lock, Strategy::Resolve]);
        assert_eq!(parse_strategy_order(""), Err(PolicyError::EmptyStrategy));
        assert_eq!(parse_strategy_order("lock,lock"), Err(PolicyError::DuplicateStrategy(Strategy::Lock)));
        assert!(matches!(parse_strategy_order("lock,magic"), Err(PolicyError::UnknownStrategy(_))));
    }

    #[test]
    fn as_of_selects_snapshot() {
        let idx = two_releases().project(&name("urllib3")).unwrap();
        let mut p = policy("resolve");
        p.as_of = Some(at("2024-02-01T00:00:00Z"));
        let d = decl("urllib3", "");
        assert_eq!(resolve_version(&d, &idx, &p).unwrap().version.to_string(), "2.2.0");
        p.as_of = Some(at("2024-03-01T00:00:00Z"));
        let r = resolve_version(&d, &idx, &p).unwrap();
        assert_eq!(r.version.to_string(), "2.2.1");
        assert_eq!(r.resolution, Resolution::Resolved { at: at("2024-03-01T00:00:00Z"), as_of: true });
        p.as_of = Some(at("2020-01-01T00:00:00Z"));
        assert!(resolve_version(&d, &idx, &p).is_err());
    }

    #[test]
    fn filters_yanked_and_requires_python() {
        let index = StaticIndex::new()
            .release("m", "3.4", "2020-01-01T00:00:00Z", &[])
            .release("m", "3.8", "2021-01-01T00:00:00Z", &[])
            .release("m", "3.9", "2021-06-01T00:00:00Z", &[])
            .release("m", "3.10", "2021-07-01T00:00:00Z", &[])
            .release("m", "4.1", "2022-01-01T00:00:00Z", &[])
            .tweak("m", "3.9", true, None)
            .tweak("m", "3.10", false, Some(">=3.12"));
        let idx = index.project(&name("m")).unwrap();
        let r = resolve_version(&decl("m", ">=3.5,<4.0"), &idx, &policy("resolve")).unwrap();
        assert_eq!(r.version.to_string(), "3.8");
    }

    #[test]
    fn unresolved_unversioned_is_kept_unknown() {
        let out = resolve_project(&model(vec![decl("ghost", "")], vec![]), &policy("lock,resolve"), &StaticIndex::new());
        assert_eq!(out.components.len(), 1);
        assert_eq!(out.components[0].resolution, Resolution::Unknown);
        assert_eq!(out.components[0].purl, "pkg:pypi/ghost");
        let codes: Vec<_> = out.diagnostics.iter().map(|d| d.code).collect();
        assert!(codes.contains(&Code::T3));
        assert!(codes.contains(&Code::Unresolved));
    }

    #[test]
    fn guess_is_opt_in_and_flagged() {
        let m = model(vec![decl("x", ">=1.2.3,<2")], vec![]);
        let out = resolve_project(&m, &policy("lock,resolve"), &StaticIndex::new());
        assert_eq!(out.components[0].resolution, Resolution::Unknown);
        let out = resolve_project(&m, &policy("lock,resolve,guess"), &StaticIndex::new());
        let c = &out.components[0];
        assert_eq!(c.resolution, Resolution::Guessed);
        assert_eq!(c.version.as_ref().unwrap().to_string(), "1.2.3");
        assert!(out.diagnostics.iter().any(|d| d.code == Code::T6 && d.subject.as_ref() == Some(&c.name)));
        let m = model(vec![decl("x", ">=1.0,==2.0")], vec![]);
        let out = resolve_project(&m, &policy("guess"), &StaticIndex::new());
        assert!(out.diagnostics.iter().any(|d| d.code == Code::GuessConflict));
    }

    #[test]
    fn transitive_closure_with_markers_and_cycles() {
        let index = StaticIndex::new()
            .release("a", "1.0", "2020-01-01T00:00:00Z", &["B>=1.0", "c; extra == \"plot\"", "d; sys_platform == \"win32\""])
            .release("b", "1.2", "2020-01-01T00:00:00Z", &["a"])
            .release("b", "0.9", "2019-01-01T00:00:00Z", &[])
            .release("c", "1.0", "2020-01-01T00:00:00Z", &[])
            .release("d", "1.0", "2020-01-01T00:00:00Z", &[]);
        let out = resolve_project(&model(vec![decl("a", "==1.0")], vec![]), &policy("resolve"), &index);
        let names: Vec<_> = out.components.iter().map(|c| format!("{}@{}", c.name, c.version.as_ref().unwrap())).collect();
        assert_eq!(names, ["a@1.0", "b@1.2"]);
        let edges: Vec<_> = out.edges.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        assert_eq!(edges, ["a->b", "b->a"]);
        assert_eq!(out.components[1].reach, Reach::Transitive);
        assert_eq!(out.components[1].scope, Scope::Required);

        let mut d = decl("a", "==1.0");
        d.extras.insert("plot".into());
        let out = resolve_project(&model(vec![d], vec![]), &policy("resolve"), &index);
        assert!(out.components.iter().any(|c| c.name.as_str() == "c"));
    }

    #[test]
    fn extras_requested_later_trigger_reexpansion() {
        let index = StaticIndex::new()
            .release("a", "1.0", "2020-01-01T00:00:00Z", &["x"])
            .release("b", "1.0", "2020-01-01T00:00:00Z", &["x[fast]"])
            .release("x", "1.0", "2020-01-01T00:00:00Z", &["speedup; extra == 'fast'"])
            .release("speedup", "1.0", "2020-01-01T00:00:00Z", &[]);
        let out = resolve_project(&model(vec![decl("a", "==1.0"), decl("b", "==1.0")], vec![]), &policy("resolve"), &index);
        assert!(out.components.iter().any(|c| c.name.as_str() == "speedup"));
        assert!(out.edges.contains(&(name("x"), name("speedup"))));
    }

    #[test]
    fn conflicts_are_reported() {
        let index = StaticIndex::new()
            .release("a", "1.0", "2020-01-01T00:00:00Z", &["c>=2"])
            .release("b", "1.0", "2020-01-01T00:00:00Z", &[])
            .release("c", "1.5", "2020-01-01T00:00:00Z", &[]);
        let out = resolve_project(&model(vec![decl("a", "==1.0"), decl("c", "==1.5")], vec![]), &policy("resolve"), &index);
        assert!(out.diagnostics.iter().any(|d| d.code == Code::VersionConflict));
    }

    fn locked(n: &str, v: &str, group: DependencyGroup, deps: &[&str]) -> LockedPackage {
        LockedPackage {
            name: name(n),
            version: Some(v.parse().unwrap()),
            hashes: Vec::new(),
            source: SourceRef::registry(),
            group,
            dependencies: deps.iter().map(|d| name(d)).collect(),
            origin: Origin::new("poetry.lock", 1),
        }
    }

    #[test]
    fn lock_wins_and_supplies_edges() {
        let m = model(
            vec![decl("a", ">=1"), {
                let mut d = decl("tool", "");
                d.group = DependencyGroup::Development;
                d
            }],
            vec![
                locked("a", "1.1", DependencyGroup::Required, &["b"]),
                locked("b", "2.0", DependencyGroup::Required, &["missing"]),
                locked("tool", "3.0", DependencyGroup::Development, &["b"]),
            ],
        );
        let out = resolve_project(&m, &policy("lock,resolve"), &StaticIndex::new());
        let names: Vec<_> = out.components.iter().map(|c| c.name.to_string()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(out.components[0].resolution, Resolution::Locked);
        assert_eq!(out.components[0].version.as_ref().unwrap().to_string(), "1.1");
        assert_eq!(out.edges.len(), 1);
        assert!(out.diagnostics.iter().any(|d| d.code == Code::ExcludedGroup && d.message.contains("tool")));

        let mut p = policy("lock,resolve");
        p.include_dev = true;
        let out = resolve_project(&m, &p, &StaticIndex::new());
        assert_eq!(out.components.len(), 3);
        assert_eq!(out.components[2].scope, Scope::ExcludedDev);
        assert!(out.edges.contains(&(name("tool"), name("b"))));
    }

    #[test]
    fn false_markers_and_merging() {
        let mut win = decl("pywin32", "");
        win.marker = Some("sys_platform == 'win32'".into());
        let mut opt = decl("x", ">=1");
        opt.group = DependencyGroup::Optional("extra".into());
        let req = decl("x", "<3");
        let index = StaticIndex::new()
            .release("x", "2.0", "2020-01-01T00:00:00Z", &[])
            .release("x", "3.0", "2020-01-01T00:00:00Z", &[]);
        let out = resolve_project(&model(vec![win, opt, req], vec![]), &policy("resolve"), &index);
        assert_eq!(out.components.len(), 1);
        let x = &out.components[0];
        assert_eq!(x.scope, Scope::Required);
        assert_eq!(x.version.as_ref().unwrap().to_string(), "2.0");
    }

    #[test]
    fn direct_url_version_from_archive() {
        let mut d = decl("docopt", "");
        d.source = SourceRef::direct_url("https://h/docopt-0.6.2.tar.gz");
        let out = resolve_project(&model(vec![d], vec![]), &policy("resolve"), &StaticIndex::new());
        assert_eq!(out.components[0].version.as_ref().unwrap().to_string(), "0.6.2");
        assert_eq!(out.components[0].resolution, Resolution::Pinned);
        assert!(out.diagnostics.iter().any(|d| d.code == Code::VersionFromUrl));
    }
}
