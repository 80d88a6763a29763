//! Fixture corpus loading and SBOM scoring.
//!
//! Each fixture is `<root>/<frontend>-<backend>/` holding the project's
//! metadata files and an `expected.json` produced by
//! `corpus/tools/extract_expected.py`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{normalize_name, PackageName};
use crate::version::{parse_specifier_set, Version, VersionSpec};

/// Compatible front-end/back-end pairs.
pub const FIXTURE_PAIRS: [(&str, &str); 12] = [
    ("hatch", "hatchling"),
    ("hatch", "pdm"),
    ("hatch", "setuptools"),
    ("pdm", "flit"),
    ("pdm", "hatchling"),
    ("pdm", "pdm"),
    ("pdm", "setuptools"),
    ("pip", "hatchling"),
    ("pip", "pdm"),
    ("pip", "setuptools"),
    ("pipenv", "pdm"),
    ("poetry", "poetry"),
];

/// Direct dependencies every fixture declares.
pub const DIRECT_NAMES: [&str; 6] = ["numpy", "docopt", "black", "seaborn", "matplotlib", "urllib3"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("fixture {0} missing from corpus")]
    MissingFixture(String),
    #[error("fixture {fixture}: {message}")]
    Malformed { fixture: String, message: String },
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    Unversioned,
    Pinned(Version),
    /// VCS commit the component must reference.
    Ref(String),
    Constraint(VersionSpec),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedDirect {
    pub name: PackageName,
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectationSet {
    pub direct: Vec<ExpectedDirect>,
    pub lockfile: Option<String>,
    pub transitive_available: bool,
    pub transitive: BTreeSet<PackageName>,
    pub lock_edges: BTreeSet<(PackageName, PackageName)>,
    /// Development-group packages recorded by the lockfile.
    pub develop: BTreeSet<PackageName>,
    pub remote: BTreeSet<PackageName>,
    pub optional: BTreeSet<PackageName>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureProject {
    pub frontend: String,
    pub backend: String,
    pub dir: PathBuf,
    pub expected: ExpectationSet,
}

impl FixtureProject {
    pub fn id(&self) -> String {
        format!("{}-{}", self.frontend, self.backend)
    }
}

#[derive(Deserialize)]
struct RawExpect {
    kind: String,
    value: Option<String>,
}

#[derive(Deserialize)]
struct RawDirect {
    name: String,
    expect: RawExpect,
}

#[derive(Deserialize)]
struct RawExpected {
    frontend: String,
    backend: String,
    direct: Vec<RawDirect>,
    lockfile: Option<String>,
    transitive_available: bool,
    transitive: Vec<String>,
    lock_edges: Vec<(String, String)>,
    #[serde(default)]
    develop: Vec<String>,
    remote: Vec<String>,
    optional: Vec<String>,
}

/// Load all twelve fixtures, in `FIXTURE_PAIRS` order.
pub fn load_corpus(root: &Path) -> Result<Vec<FixtureProject>, CorpusError> {
    FIXTURE_PAIRS
        .iter()
        .map(|(fe, be)| {
            let id = format!("{fe}-{be}");
            let dir = root.join(&id);
            if !dir.is_dir() {
                return Err(CorpusError::MissingFixture(id));
            }
            load_fixture(&dir)
        })
        .collect()
}

pub fn load_fixture(dir: &Path) -> Result<FixtureProject, CorpusError> {
    let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let path = dir.join("expected.json");
    let text = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io { path, source })?;
    let malformed = |message: String| CorpusError::Malformed {
        fixture: id.clone(),
        message,
    };
    let raw: RawExpected = serde_json::from_str(&text).map_err(|e| malformed(format!("expected.json: {e}")))?;
    if !FIXTURE_PAIRS.contains(&(raw.frontend.as_str(), raw.backend.as_str())) {
        return Err(malformed(format!("{}-{} is not a compatible pair", raw.frontend, raw.backend)));
    }
    if format!("{}-{}", raw.frontend, raw.backend) != id {
        return Err(malformed(format!("directory does not match pair {}-{}", raw.frontend, raw.backend)));
    }
    let name = |s: &str| normalize_name(s).map_err(|e| malformed(format!("bad name {s:?}: {e}")));
    let names = |v: &[String]| v.iter().map(|s| name(s)).collect::<Result<BTreeSet<_>, _>>();

    let mut direct = Vec::new();
    for d in &raw.direct {
        let value = || d.expect.value.clone().ok_or_else(|| malformed(format!("{}: expectation needs a value", d.name)));
        let expect = match d.expect.kind.as_str() {
            "unversioned" => Expectation::Unversioned,
            "pinned" => Expectation::Pinned(value()?.parse().map_err(|e| malformed(format!("{}: {e}", d.name)))?),
            "ref" => Expectation::Ref(value()?),
            "constraint" => Expectation::Constraint(parse_specifier_set(&value()?).map_err(|e| malformed(format!("{}: {e}", d.name)))?),
            other => return Err(malformed(format!("{}: unknown expectation kind {other:?}", d.name))),
        };
        direct.push(ExpectedDirect { name: name(&d.name)?, expect });
    }
    let declared: BTreeSet<&str> = direct.iter().map(|d| d.name.as_str()).collect();
    for required in DIRECT_NAMES {
        if !declared.contains(required) {
            return Err(malformed(format!("expectation lacks direct dependency {required}")));
        }
    }
    let lock_edges = raw
        .lock_edges
        .iter()
        .map(|(a, b)| Ok((name(a)?, name(b)?)))
        .collect::<Result<BTreeSet<_>, CorpusError>>()?;
    Ok(FixtureProject {
        frontend: raw.frontend.clone(),
        backend: raw.backend.clone(),
        dir: dir.to_path_buf(),
        expected: ExpectationSet {
            direct,
            lockfile: raw.lockfile.clone(),
            transitive_available: raw.transitive_available,
            transitive: names(&raw.transitive)?,
            lock_edges,
            develop: names(&raw.develop)?,
            remote: names(&raw.remote)?,
            optional: names(&raw.optional)?,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TriState {
    Yes,
    Partial,
    No,
}

impl TriState {
    fn from_counts(found: usize, total: usize) -> TriState {
        if total > 0 && found == total {
            TriState::Yes
        } else if found > 0 {
            TriState::Partial
        } else {
            TriState::No
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TriState::Yes => "yes",
            TriState::Partial => "partial",
            TriState::No => "no",
        }
    }
}

impl fmt::Display for TriState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreRow {
    pub finds_direct: TriState,
    pub finds_transitive: TriState,
    pub finds_remote: TriState,
    pub finds_optional: TriState,
    pub version_mismatches: Vec<String>,
    /// Expected names absent from the SBOM.
    pub missing: Vec<String>,
}

/// A component as read back from an emitted SBOM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbomComponent {
    pub name: PackageName,
    pub version: Option<String>,
    pub purl: String,
    pub bom_ref: String,
    pub properties: BTreeMap<String, String>,
}

impl SbomComponent {
    pub fn property(&self, key: &str) -> Option<&str> {
        self.properties.get(&format!("{}:{key}", crate::cyclonedx::PROPERTY_PREFIX)).map(String::as_str)
    }

    pub fn is_remote(&self) -> bool {
        self.purl.contains("vcs_url=") || self.purl.contains("download_url=")
    }

    /// `ref` qualifier of the purl.
    pub fn vcs_ref(&self) -> Option<String> {
        let query = self.purl.split_once('?')?.1;
        let query = query.split('#').next().unwrap_or(query);
        query
            .split('&')
            .find_map(|kv| kv.strip_prefix("ref="))
            .map(|r| percent_encoding::percent_decode_str(r).decode_utf8_lossy().into_owned())
    }
}

/// Components of an SBOM document, skipping entries without a usable name.
pub fn sbom_components(doc: &Value) -> Vec<SbomComponent> {
    let mut out = Vec::new();
    for c in doc["components"].as_array().into_iter().flatten() {
        let Some(name) = c["name"].as_str().and_then(|n| normalize_name(n).ok()) else {
            continue;
        };
        let properties = c["properties"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|p| Some((p["name"].as_str()?.to_string(), p["value"].as_str()?.to_string())))
            .collect();
        out.push(SbomComponent {
            name,
            version: c["version"].as_str().map(str::to_string),
            purl: c["purl"].as_str().unwrap_or_default().to_string(),
            bom_ref: c["bom-ref"].as_str().unwrap_or_default().to_string(),
            properties,
        });
    }
    out
}

/// Dependency edges of an SBOM as name pairs; the root entry is skipped.
pub fn sbom_edges(doc: &Value) -> BTreeSet<(PackageName, PackageName)> {
    let by_ref: BTreeMap<String, PackageName> = sbom_components(doc).into_iter().map(|c| (c.bom_ref, c.name)).collect();
    let mut edges = BTreeSet::new();
    for d in doc["dependencies"].as_array().into_iter().flatten() {
        let Some(parent) = d["ref"].as_str().and_then(|r| by_ref.get(r)) else {
            continue;
        };
        for child in d["dependsOn"].as_array().into_iter().flatten() {
            if let Some(child) = child.as_str().and_then(|r| by_ref.get(r)) {
                edges.insert((parent.clone(), child.clone()));
            }
        }
    }
    edges
}

/// Score an SBOM against a fixture's expectations. Names are compared
/// after normalization; only pinned, ref and constraint expectations are
/// checked for version correctness.
pub fn diff_sbom(produced: &Value, expected: &ExpectationSet) -> ScoreRow {
    let components: BTreeMap<PackageName, SbomComponent> =
        sbom_components(produced).into_iter().map(|c| (c.name.clone(), c)).collect();
    let mut missing = Vec::new();
    let mut mismatches = Vec::new();

    let mut direct_found = 0;
    for d in &expected.direct {
        let Some(c) = components.get(&d.name) else {
            missing.push(d.name.to_string());
            continue;
        };
        direct_found += 1;
        let version = c.version.as_deref().and_then(|v| v.parse::<Version>().ok());
        match &d.expect {
            Expectation::Unversioned => {}
            Expectation::Pinned(want) => {
                if version.as_ref() != Some(want) {
                    mismatches.push(format!("{}: expected {want}, found {}", d.name, c.version.as_deref().unwrap_or("no version")));
                }
            }
            Expectation::Ref(want) => {
                if c.vcs_ref().as_deref() != Some(want.as_str()) {
                    mismatches.push(format!("{}: expected ref {want}, found {}", d.name, c.vcs_ref().unwrap_or_else(|| "no ref".into())));
                }
            }
            Expectation::Constraint(spec) => match &version {
                Some(v) if crate::version::matches(spec, v) => {}
                Some(v) => mismatches.push(format!("{}: {v} outside {spec}", d.name)),
                None => mismatches.push(format!("{}: no version to check against {spec}", d.name)),
            },
        }
    }

    let finds_transitive = if expected.transitive_available {
        let found = expected.transitive.iter().filter(|n| components.contains_key(*n)).count();
        missing.extend(expected.transitive.iter().filter(|n| !components.contains_key(*n)).map(|n| n.to_string()));
        TriState::from_counts(found, expected.transitive.len())
    } else {
        let any = components.values().any(|c| c.property("reach") == Some("transitive"));
        if any { TriState::Yes } else { TriState::No }
    };
    let remote_found = expected
        .remote
        .iter()
        .filter(|n| components.get(*n).is_some_and(SbomComponent::is_remote))
        .count();
    let optional_found = expected.optional.iter().filter(|n| components.contains_key(*n)).count();

    missing.sort();
    missing.dedup();
    ScoreRow {
        finds_direct: TriState::from_counts(direct_found, expected.direct.len()),
        finds_transitive,
        finds_remote: TriState::from_counts(remote_found, expected.remote.len()),
        finds_optional: TriState::from_counts(optional_found, expected.optional.len()),
        version_mismatches: mismatches,
        missing,
    }
}

/// Fixture rows scored against one generator run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreMatrix {
    pub rows: Vec<(String, ScoreRow)>,
}

const ROW_LABELS: [&str; 4] = [
    "Find direct dependencies",
    "Find transitive dependencies",
    "Find remote dependencies",
    "Find optional dependencies",
];

pub fn score_matrix(rows: Vec<(String, ScoreRow)>) -> ScoreMatrix {
    ScoreMatrix { rows }
}

impl ScoreMatrix {
    fn cells(row: &ScoreRow) -> [TriState; 4] {
        [row.finds_direct, row.finds_transitive, row.finds_remote, row.finds_optional]
    }

    /// One line per criterion, one column per fixture.
    pub fn to_text(&self) -> String {
        let label_width = ROW_LABELS.iter().map(|l| l.len()).max().unwrap_or(0);
        let widths: Vec<usize> = self.rows.iter().map(|(id, _)| id.len().max(7)).collect();
        let mut out = format!("{:label_width$}", "");
        for ((id, _), w) in self.rows.iter().zip(&widths) {
            out.push_str(&format!("  {id:w$}"));
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        for (i, label) in ROW_LABELS.iter().enumerate() {
            out.push_str(&format!("{label:label_width$}"));
            for ((_, row), w) in self.rows.iter().zip(&widths) {
                out.push_str(&format!("  {:w$}", Self::cells(row)[i].as_str()));
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
        let mismatched: Vec<String> = self
            .rows
            .iter()
            .flat_map(|(id, r)| r.version_mismatches.iter().map(move |m| format!("{id}: {m}")))
            .collect();
        out.push_str(&format!("{:label_width$}  {}\n", "Version mismatches", mismatched.len()));
        for m in mismatched {
            out.push_str(&format!("  {m}\n"));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let fixtures: serde_json::Map<String, Value> = self
            .rows
            .iter()
            .map(|(id, row)| (id.clone(), serde_json::to_value(row).expect("score rows serialize")))
            .collect();
        json!({ "rows": ROW_LABELS, "fixtures": fixtures })
    }

    pub fn all_yes(&self) -> bool {
        self.rows.iter().all(|(_, r)| Self::cells(r).iter().all(|c| *c == TriState::Yes))
    }
}
