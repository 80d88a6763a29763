//! Package index access: the JSON API, a replayable disk cache and an
//! in-memory index for tests.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::PackageName;
use crate::version::{parse_specifier_set, parse_version, Version, VersionSpec};

pub const DEFAULT_INDEX_URL: &str = "https://pypi.org";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub version: Version,
    /// Earliest file upload; `None` when the index did not say.
    pub uploaded: Option<DateTime<Utc>>,
    pub yanked: bool,
    pub requires_python: Option<VersionSpec>,
}

/// Every release of one project, ascending by version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleaseIndex {
    pub name: PackageName,
    pub releases: Vec<Release>,
    /// `requires_dist` known without a per-version request (the latest
    /// release, from the project document).
    pub requires_dist: BTreeMap<Version, Vec<String>>,
}

impl ReleaseIndex {
    pub fn new(name: PackageName, mut releases: Vec<Release>) -> Self {
        releases.sort_by(|a, b| a.version.cmp(&b.version));
        ReleaseIndex {
            name,
            releases,
            requires_dist: BTreeMap::new(),
        }
    }

    pub fn requires_python(&self) -> BTreeMap<Version, Option<VersionSpec>> {
        self.releases
            .iter()
            .map(|r| (r.version.clone(), r.requires_python.clone()))
            .collect()
    }

    /// Parse the body of `GET <index>/pypi/<name>/json`.
    pub fn from_project_json(name: &PackageName, body: &Value) -> Result<Self, IndexError> {
        let malformed = |what: &str| IndexError::Malformed {
            name: name.to_string(),
            message: what.to_string(),
        };
        let releases_obj = body
            .get("releases")
            .and_then(Value::as_object)
            .ok_or_else(|| malformed("missing `releases` object"))?;
        let mut releases = Vec::new();
        for (raw, files) in releases_obj {
            let Ok(version) = parse_version(raw) else { continue };
            let files = files.as_array().ok_or_else(|| malformed("release is not a list"))?;
            if files.is_empty() {
                continue;
            }
            let uploaded = files
                .iter()
                .filter_map(|f| f.get("upload_time_iso_8601").and_then(Value::as_str))
                .filter_map(|t| DateTime::parse_from_rfc3339(t).ok())
                .map(|t| t.with_timezone(&Utc))
                .min();
            let yanked = files.iter().all(|f| f.get("yanked").and_then(Value::as_bool) == Some(true));
            let requires_python = files
                .iter()
                .find_map(|f| f.get("requires_python").and_then(Value::as_str))
                .and_then(|s| parse_specifier_set(s).ok())
                .filter(|s| !s.is_empty());
            releases.push(Release {
                version,
                uploaded,
                yanked,
                requires_python,
            });
        }
        let mut index = ReleaseIndex::new(name.clone(), releases);
        let info = body.get("info");
        if let Some(v) = info
            .and_then(|i| i.get("version"))
            .and_then(Value::as_str)
            .and_then(|v| parse_version(v).ok())
        {
            index.requires_dist.insert(v, requires_dist_of(info.unwrap()));
        }
        Ok(index)
    }
}

fn requires_dist_of(info: &Value) -> Vec<String> {
    info.get("requires_dist")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(Value::as_str)
        .map(str::to_string)
        .collect()
}

/// Reduce a project document to the fields this crate reads: one entry
/// per release with its earliest upload time.
pub fn trim_project_json(body: &Value) -> Value {
    let info = body.get("info").cloned().unwrap_or(Value::Null);
    let mut releases = serde_json::Map::new();
    if let Some(obj) = body.get("releases").and_then(Value::as_object) {
        for (v, files) in obj {
            let files = files.as_array().cloned().unwrap_or_default();
            let earliest = files
                .iter()
                .min_by_key(|f| f.get("upload_time_iso_8601").and_then(Value::as_str).unwrap_or("~").to_string());
            let entry = earliest.map(|f| {
                json!({
                    "requires_python": f.get("requires_python").cloned().unwrap_or(Value::Null),
                    "upload_time_iso_8601": f.get("upload_time_iso_8601").cloned().unwrap_or(Value::Null),
                    "yanked": files.iter().all(|f| f.get("yanked").and_then(Value::as_bool) == Some(true)),
                })
            });
            releases.insert(v.clone(), Value::Array(entry.into_iter().collect()));
        }
    }
    json!({
        "info": {
            "name": info.get("name").cloned().unwrap_or(Value::Null),
            "requires_dist": info.get("requires_dist").cloned().unwrap_or(Value::Null),
            "requires_python": info.get("requires_python").cloned().unwrap_or(Value::Null),
            "version": info.get("version").cloned().unwrap_or(Value::Null),
        },
        "releases": releases,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("{name} not found on the index")]
    NotFound { name: String },
    #[error("{name}: offline and not in the cache")]
    Offline { name: String },
    #[error("{name}: network failure: {message}")]
    Network { name: String, message: String },
    #[error("{name}: malformed index response: {message}")]
    Malformed { name: String, message: String },
}

/// Source of release data. Implementations must be safe to call from
/// several threads at once.
pub trait IndexClient: Sync {
    fn project(&self, name: &PackageName) -> Result<ReleaseIndex, IndexError>;
    fn requires_dist(&self, name: &PackageName, version: &Version) -> Result<Vec<String>, IndexError>;
}

/// Cache directory name for an index URL (`https://pypi.org` → `pypi.org`).
pub fn index_key(index_url: &str) -> String {
    let rest = index_url.split_once("://").map(|(_, r)| r).unwrap_or(index_url);
    rest.trim_end_matches('/')
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    body: Value,
    fetched_at: String,
    index_url: String,
    name: String,
}

/// `<dir>/<index-key>/<name>.json` for projects and
/// `<dir>/<index-key>/<name>/<version>.json` for single releases. Each
/// file wraps the response body with the fetch time and index URL.
#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DiskCache {
            dir: dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, index_url: &str, name: &PackageName, version: Option<&Version>) -> PathBuf {
        let base = self.dir.join(index_key(index_url));
        match version {
            None => base.join(format!("{}.json", name.normalized())),
            Some(v) => base.join(name.normalized()).join(format!("{v}.json")),
        }
    }

    pub fn get(&self, index_url: &str, name: &PackageName, version: Option<&Version>) -> Option<Value> {
        let text = std::fs::read_to_string(self.path(index_url, name, version)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        Some(entry.body)
    }

    /// Write atomically: a temporary file renamed into place.
    pub fn put(
        &self,
        index_url: &str,
        name: &PackageName,
        version: Option<&Version>,
        body: &Value,
        fetched_at: DateTime<Utc>,
    ) -> std::io::Result<()> {
        let path = self.path(index_url, name, version);
        let entry = CacheEntry {
            body: body.clone(),
            fetched_at: fetched_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            index_url: index_url.to_string(),
            name: name.to_string(),
        };
        let text = serde_json::to_string_pretty(&entry)? + "\n";
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, path)
    }
}

/// The PyPI JSON API with an optional disk cache. Offline mode answers
/// from the cache only.
pub struct HttpIndex {
    index_url: String,
    cache: Option<DiskCache>,
    offline: bool,
    agent: ureq::Agent,
    memo: Mutex<HashMap<String, Result<ReleaseIndex, IndexError>>>,
}

impl HttpIndex {
    pub fn new(index_url: &str, cache: Option<DiskCache>, offline: bool) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .user_agent(concat!("pysbom/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        HttpIndex {
            index_url: index_url.trim_end_matches('/').to_string(),
            cache,
            offline,
            agent,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn index_url(&self) -> &str {
        &self.index_url
    }

    fn get_json(&self, name: &PackageName, url: &str) -> Result<Value, IndexError> {
        log::debug!("GET {url}");
        let mut response = self.agent.get(url).call().map_err(|e| match e {
            ureq::Error::StatusCode(404) => IndexError::NotFound { name: name.to_string() },
            other => IndexError::Network {
                name: name.to_string(),
                message: other.to_string(),
            },
        })?;
        response
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| e.to_string())
            .and_then(|text| serde_json::from_str(&text).map_err(|e| e.to_string()))
            .map_err(|message| IndexError::Malformed {
                name: name.to_string(),
                message,
            })
    }

    fn fetch(&self, name: &PackageName, version: Option<&Version>) -> Result<Value, IndexError> {
        if let Some(body) = self.cache.as_ref().and_then(|c| c.get(&self.index_url, name, version)) {
            return Ok(body);
        }
        if self.offline {
            return Err(IndexError::Offline { name: name.to_string() });
        }
        let url = match version {
            None => format!("{}/pypi/{}/json", self.index_url, name.normalized()),
            Some(v) => format!("{}/pypi/{}/{v}/json", self.index_url, name.normalized()),
        };
        let body = self.get_json(name, &url)?;
        let body = match version {
            None => trim_project_json(&body),
            Some(_) => json!({
                "info": {
                    "name": body["info"]["name"],
                    "requires_dist": body["info"]["requires_dist"],
                    "requires_python": body["info"]["requires_python"],
                    "version": body["info"]["version"],
                },
                "urls": body.get("urls").cloned().unwrap_or(Value::Null),
            }),
        };
        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(&self.index_url, name, version, &body, Utc::now()) {
                log::warn!("cannot write index cache for {name}: {e}");
            }
        }
        Ok(body)
    }
}

impl IndexClient for HttpIndex {
    fn project(&self, name: &PackageName) -> Result<ReleaseIndex, IndexError> {
        let key = name.normalized().to_string();
        if let Some(hit) = self.memo.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return hit.clone();
        }
        let result = self
            .fetch(name, None)
            .and_then(|body| ReleaseIndex::from_project_json(name, &body));
        self.memo
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key, result.clone());
        result
    }

    fn requires_dist(&self, name: &PackageName, version: &Version) -> Result<Vec<String>, IndexError> {
        if let Ok(project) = self.project(name) {
            if let Some(deps) = project.requires_dist.get(version) {
                return Ok(deps.clone());
            }
        }
        let body = self.fetch(name, Some(version))?;
        Ok(body.get("info").map(requires_dist_of).unwrap_or_default())
    }
}

/// Fixed in-memory index.
#[derive(Debug, Clone, Default)]
pub struct StaticIndex {
    projects: BTreeMap<String, (ReleaseIndex, BTreeMap<Version, Vec<String>>)>,
}

impl StaticIndex {
    pub fn new() -> Self {
        StaticIndex::default()
    }

    /// Add a release. `uploaded` is RFC 3339.
    pub fn release(mut self, name: &str, version: &str, uploaded: &str, requires_dist: &[&str]) -> Self {
        let name = PackageName::new(name).expect("valid name");
        let version = parse_version(version).expect("valid version");
        let uploaded = DateTime::parse_from_rfc3339(uploaded)
            .expect("RFC 3339 time")
            .with_timezone(&Utc);
        let entry = self
            .projects
            .entry(name.normalized().to_string())
            .or_insert_with(|| (ReleaseIndex::new(name.clone(), Vec::new()), BTreeMap::new()));
        entry.0.releases.push(Release {
            version: version.clone(),
            uploaded: Some(uploaded),
            yanked: false,
            requires_python: None,
        });
        entry.0.releases.sort_by(|a, b| a.version.cmp(&b.version));
        entry.1.insert(version, requires_dist.iter().map(|s| s.to_string()).collect());
        self
    }

    /// Change the yanked flag or `requires_python` of a release added earlier.
    pub fn tweak(mut self, name: &str, version: &str, yanked: bool, requires_python: Option<&str>) -> Self {
        let key = PackageName::new(name).expect("valid name").normalized().to_string();
        let version = parse_version(version).expect("valid version");
        if let Some((index, _)) = self.projects.get_mut(&key) {
            for r in index.releases.iter_mut().filter(|r| r.version == version) {
                r.yanked = yanked;
                r.requires_python = requires_python.map(|s| parse_specifier_set(s).expect("valid spec"));
            }
        }
        self
    }
}

impl IndexClient for StaticIndex {
    fn project(&self, name: &PackageName) -> Result<ReleaseIndex, IndexError> {
        self.projects
            .get(name.normalized())
            .map(|(i, _)| i.clone())
            .ok_or_else(|| IndexError::NotFound { name: name.to_string() })
    }

    fn requires_dist(&self, name: &PackageName, version: &Version) -> Result<Vec<String>, IndexError> {
        self.projects
            .get(name.normalized())
            .and_then(|(_, deps)| deps.get(version).cloned())
            .ok_or_else(|| IndexError::NotFound {
                name: format!("{name} {version}"),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(s: &str) -> PackageName {
        PackageName::new(s).unwrap()
    }

    #[test]
    fn project_json_parsing() {
        let body = json!({
            "info": {"name": "x", "version": "2.0", "requires_dist": ["y>=1"], "requires_python": ">=3.8"},
            "releases": {
                "1.0": [{"upload_time_iso_8601": "2020-01-02T00:00:00.000Z", "yanked": false, "requires_python": null},
                        {"upload_time_iso_8601": "2020-01-01T00:00:00Z", "yanked": false, "requires_python": null}],
                "2.0": [{"upload_time_iso_8601": "2021-01-01T00:00:00Z", "yanked": false, "requires_python": ">=3.8"}],
                "1.5": [{"upload_time_iso_8601": "2020-06-01T00:00:00Z", "yanked": true, "requires_python": ""}],
                "0.1": [],
                "not-a-version!": [{"upload_time_iso_8601": "2019-01-01T00:00:00Z"}]
            }
        });
        let idx = ReleaseIndex::from_project_json(&name("x"), &body).unwrap();
        let versions: Vec<_> = idx.releases.iter().map(|r| r.version.to_string()).collect();
        assert_eq!(versions, ["1.0", "1.5", "2.0"]);
        assert_eq!(idx.releases[0].uploaded.unwrap().to_rfc3339(), "2020-01-01T00:00:00+00:00");
        assert!(idx.releases[1].yanked);
        assert!(idx.releases[1].requires_python.is_none());
        assert_eq!(idx.releases[2].requires_python.as_ref().unwrap().to_string(), ">=3.8");
        assert_eq!(idx.requires_dist.values().next().unwrap(), &vec!["y>=1".to_string()]);
        assert!(ReleaseIndex::from_project_json(&name("x"), &json!({})).is_err());
    }

    #[test]
    fn trimming_keeps_what_is_read() {
        let body = json!({
            "info": {"name": "x", "version": "1.0", "requires_dist": null, "requires_python": null, "summary": "drop me"},
            "releases": {"1.0": [
                {"upload_time_iso_8601": "2020-01-02T00:00:00Z", "yanked": false, "requires_python": null, "size": 5},
                {"upload_time_iso_8601": "2020-01-01T00:00:00Z", "yanked": false, "requires_python": null}
            ]}
        });
        let trimmed = trim_project_json(&body);
        assert!(trimmed["info"].get("summary").is_none());
        assert_eq!(trimmed["releases"]["1.0"].as_array().unwrap().len(), 1);
        assert_eq!(
            ReleaseIndex::from_project_json(&name("x"), &trimmed).unwrap(),
            ReleaseIndex::from_project_json(&name("x"), &body).unwrap()
        );
    }

    #[test]
    fn disk_cache_round_trip_and_offline() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path());
        let body = json!({"info": {"version": "1.0", "requires_dist": ["z"]}, "releases": {"1.0": [{"upload_time_iso_8601": "2020-01-01T00:00:00Z", "yanked": false}]}});
        cache.put("https://pypi.org", &name("Foo_Bar"), None, &body, Utc::now()).unwrap();
        assert!(dir.path().join("pypi.org/foo-bar.json").exists());
        let index = HttpIndex::new("https://pypi.org/", Some(cache), true);
        let project = index.project(&name("foo-bar")).unwrap();
        assert_eq!(project.releases.len(), 1);
        let v = parse_version("1.0").unwrap();
        assert_eq!(index.requires_dist(&name("foo-bar"), &v).unwrap(), ["z"]);
        assert_eq!(
            index.project(&name("missing")),
            Err(IndexError::Offline { name: "missing".into() })
        );
        let v2 = parse_version("0.9").unwrap();
        assert!(matches!(index.requires_dist(&name("foo-bar"), &v2), Err(IndexError::Offline { .. })));
    }

    #[test]
    fn index_keys() {
        assert_eq!(index_key("https://pypi.org"), "pypi.org");
        assert_eq!(index_key("https://pypi.org/"), "pypi.org");
        assert_eq!(index_key("http://localhost:8080/simple"), "localhost_8080_simple");
    }

    #[test]
    fn static_index() {
        let idx = StaticIndex::new()
            .release("a", "1.0", "2020-01-01T00:00:00Z", &["b>=1"])
            .release("a", "0.5", "2019-01-01T00:00:00Z", &[])
            .tweak("a", "1.0", true, Some(">=3.12"));
        let p = idx.project(&name("A")).unwrap();
        assert_eq!(p.releases[0].version.to_string(), "0.5");
        assert!(p.releases[1].yanked);
        assert!(idx.project(&name("b")).is_err());
    }
}
