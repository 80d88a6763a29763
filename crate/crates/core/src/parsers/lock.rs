//! Lockfile dialects: poetry.lock, Pipfile.lock and pdm.lock.

use std::path::Path;

use serde_json::Value as Json;
use toml::{Table, Value};

use crate::diagnostics::{Code, Diagnostic};
use crate::model::{
    normalize_name, DependencyGroup, FileHash, LockedPackage, Origin, PackageName, SourceRef,
    VcsType,
};
use crate::requirement::{parse_requirement, source_for_url};
use crate::version::parse_version;

use super::{line_of, ParseError};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LockParse {
    pub packages: Vec<LockedPackage>,
    pub diagnostics: Vec<Diagnostic>,
}

fn toml_doc(content: &str, file: &Path) -> Result<Table, ParseError> {
    toml::from_str(content).map_err(|e| ParseError::Syntax {
        file: file.to_path_buf(),
        line: e.span().map(|s| content[..s.start].lines().count().max(1)),
        message: e.message().to_string(),
    })
}

fn shape(file: &Path, line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Shape {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Strongest of the named groups. `main`/`default` are required, `dev`
/// is development, anything else is an optional group.
fn group_from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> DependencyGroup {
    names
        .into_iter()
        .map(|g| match g {
            "main" | "default" => DependencyGroup::Required,
            "dev" | "develop" => DependencyGroup::Development,
            other => DependencyGroup::Optional(other.to_string()),
        })
        .reduce(DependencyGroup::stronger)
        .unwrap_or(DependencyGroup::Required)
}

fn file_hashes(files: Option<&Value>) -> Vec<FileHash> {
    let mut out: Vec<FileHash> = files
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|f| f.get("hash").and_then(Value::as_str))
        .filter_map(FileHash::parse)
        .collect();
    out.sort();
    out.dedup();
    out
}

struct Entry<'a> {
    table: &'a Table,
    name: PackageName,
    origin: Origin,
}

fn package_entries<'a>(doc: &'a Table, content: &str, file: &Path) -> Result<Vec<Entry<'a>>, ParseError> {
    let mut out = Vec::new();
    let packages = doc.get("package").and_then(Value::as_array);
    for pkg in packages.into_iter().flatten() {
        let table = pkg
            .as_table()
            .ok_or_else(|| shape(file, 0, "[[package]] entry is not a table"))?;
        let raw = table
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| shape(file, 0, "[[package]] entry without a name"))?;
        let line = line_of(content, &format!("name = \"{raw}\""));
        let name = normalize_name(raw).map_err(|e| shape(file, line, format!("bad package name {raw:?}: {e}")))?;
        out.push(Entry {
            table,
            name,
            origin: Origin::new(file, line),
        });
    }
    Ok(out)
}

fn dialect_note(dialect: &str, version: Option<&str>, file: &Path) -> Diagnostic {
    Diagnostic::info(
        Code::E8,
        format!(
            "{dialect} lockfile format {} read with its dedicated parser",
            version.unwrap_or("(unversioned)")
        ),
    )
    .with_origin(Origin::new(file, 0))
}

pub fn parse_poetry_lock(content: &str, file: &Path) -> Result<LockParse, ParseError> {
    let doc = toml_doc(content, file)?;
    let mut out = LockParse::default();
    let lock_version = doc
        .get("metadata")
        .and_then(|m| m.get("lock-version"))
        .and_then(Value::as_str);
    out.diagnostics.push(dialect_note("poetry", lock_version, file));

    for Entry { table, name, origin } in package_entries(&doc, content, file)? {
        let source = match table.get("source").and_then(Value::as_table) {
            None => SourceRef::registry(),
            Some(src) => {
                let url = src.get("url").and_then(Value::as_str).unwrap_or_default();
                match src.get("type").and_then(Value::as_str).unwrap_or("") {
                    "git" => {
                        let reference = ["resolved_reference", "reference"]
                            .iter()
                            .find_map(|k| src.get(*k).and_then(Value::as_str))
                            .map(str::to_string);
                        let mut s = SourceRef::vcs(VcsType::Git, url.trim_start_matches("git+"), reference);
                        s.subdirectory = src.get("subdirectory").and_then(Value::as_str).map(str::to_string);
                        s
                    }
                    "url" => SourceRef::direct_url(url),
                    "file" | "directory" => SourceRef::path(url),
                    "legacy" => SourceRef::registry_at(url),
                    other => {
                        return Err(shape(file, origin.line, format!("unknown source type {other:?} for {name}")))
                    }
                }
            }
        };
        let version = match table.get("version").and_then(Value::as_str) {
            Some(v) => Some(
                parse_version(v).map_err(|e| shape(file, origin.line, format!("{name}: {e}")))?,
            ),
            None => None,
        };
        if version.is_none() && source.is_registry() {
            return Err(shape(file, origin.line, format!("registry package {name} has no version")));
        }
        let group = if let Some(groups) = table.get("groups").and_then(Value::as_array) {
            group_from_names(groups.iter().filter_map(Value::as_str))
        } else if let Some(cat) = table.get("category").and_then(Value::as_str) {
            group_from_names([cat])
        } else {
            DependencyGroup::Required
        };
        let mut dependencies: Vec<PackageName> = table
            .get("dependencies")
            .and_then(Value::as_table)
            .into_iter()
            .flat_map(|t| t.keys())
            .filter_map(|k| normalize_name(k).ok())
            .collect();
        dependencies.sort();
        dependencies.dedup();
        out.packages.push(LockedPackage {
            name,
            version,
            hashes: file_hashes(table.get("files")),
            source,
            group,
            dependencies,
            origin,
        });
    }
    Ok(out)
}

pub fn parse_pdm_lock(content: &str, file: &Path) -> Result<LockParse, ParseError> {
    let doc = toml_doc(content, file)?;
    let mut out = LockParse::default();
    let lock_version = doc
        .get("metadata")
        .and_then(|m| m.get("lock_version"))
        .and_then(Value::as_str);
    out.diagnostics.push(dialect_note("pdm", lock_version, file));

    for Entry { table, name, origin } in package_entries(&doc, content, file)? {
        let str_field = |k: &str| table.get(k).and_then(Value::as_str);
        let source = if let Some(git) = str_field("git") {
            let reference = str_field("revision").or(str_field("ref")).map(str::to_string);
            let mut s = SourceRef::vcs(VcsType::Git, git.trim_start_matches("git+"), reference);
            s.subdirectory = str_field("subdirectory").map(str::to_string);
            s
        } else if let Some(url) = str_field("url") {
            source_for_url(url)
        } else if let Some(path) = str_field("path") {
            SourceRef::path(path)
        } else {
            SourceRef::registry()
        };
        let version = match str_field("version") {
            Some(v) => Some(parse_version(v).map_err(|e| shape(file, origin.line, format!("{name}: {e}")))?),
            None => None,
        };
        if version.is_none() && source.is_registry() {
            return Err(shape(file, origin.line, format!("registry package {name} has no version")));
        }
        let group = group_from_names(
            table
                .get("groups")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .filter_map(Value::as_str),
        );
        let mut dependencies = Vec::new();
        for dep in table.get("dependencies").and_then(Value::as_array).into_iter().flatten() {
            let Some(text) = dep.as_str() else { continue };
            match parse_requirement(text) {
                Ok(r) => dependencies.push(r.name),
                Err(e) => out.diagnostics.push(
                    Diagnostic::warning(Code::ParseError, format!("dependency {text:?} of {name}: {e}"))
                        .with_subject(name.clone())
                        .with_origin(origin.clone()),
                ),
            }
        }
        dependencies.sort();
        dependencies.dedup();
        out.packages.push(LockedPackage {
            name,
            version,
            hashes: file_hashes(table.get("files")),
            source,
            group,
            dependencies,
            origin,
        });
    }
    Ok(out)
}

/// Both `default` and `develop` are read; a package present in both keeps
/// the required group.
pub fn parse_pipfile_lock(content: &str, file: &Path) -> Result<LockParse, ParseError> {
    let doc: Json = serde_json::from_str(content).map_err(|e| ParseError::Syntax {
        file: file.to_path_buf(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let root = doc
        .as_object()
        .ok_or_else(|| shape(file, 0, "top level is not an object"))?;
    if !root.contains_key("default") && !root.contains_key("develop") {
        return Err(shape(file, 0, "neither \"default\" nor \"develop\" section present"));
    }
    let mut out = LockParse::default();
    let spec = root
        .get("_meta")
        .and_then(|m| m.get("pipfile-spec"))
        .map(|v| v.to_string());
    out.diagnostics.push(dialect_note("pipenv", spec.as_deref(), file));

    for (section, group) in [("default", DependencyGroup::Required), ("develop", DependencyGroup::Development)] {
        let Some(entries) = root.get(section) else { continue };
        let entries = entries
            .as_object()
            .ok_or_else(|| shape(file, 0, format!("\"{section}\" is not an object")))?;
        for (raw, entry) in entries {
            let line = line_of(content, &format!("\"{raw}\": {{"));
            let origin = Origin::new(file, line);
            let name = normalize_name(raw).map_err(|e| shape(file, line, format!("bad package name {raw:?}: {e}")))?;
            let field = |k: &str| entry.get(k).and_then(Json::as_str);
            let source = if let Some(git) = field("git") {
                let mut s = SourceRef::vcs(VcsType::Git, git.trim_start_matches("git+"), field("ref").map(str::to_string));
                s.subdirectory = field("subdirectory").map(str::to_string);
                s
            } else if let Some(url) = field("file") {
                source_for_url(url)
            } else if let Some(path) = field("path") {
                SourceRef::path(path)
            } else {
                SourceRef::registry()
            };
            let version = match field("version") {
                Some(v) => {
                    let bare = v.trim_start_matches("==").trim();
                    Some(parse_version(bare).map_err(|e| shape(file, line, format!("{name}: {e}")))?)
                }
                None => None,
            };
            if version.is_none() {
                if source.is_registry() {
                    return Err(shape(file, line, format!("registry package {name} has no version")));
                }
                out.diagnostics.push(
                    Diagnostic::warning(
                        Code::E7,
                        format!("Pipfile.lock omits the version of remote dependency {name}"),
                    )
                    .with_subject(name.clone())
                    .with_origin(origin.clone()),
                );
            }
            let mut hashes: Vec<FileHash> = entry
                .get("hashes")
                .and_then(Json::as_array)
                .into_iter()
                .flatten()
                .filter_map(Json::as_str)
                .filter_map(FileHash::parse)
                .collect();
            hashes.sort();
            hashes.dedup();
            let package = LockedPackage {
                name,
                version,
                hashes,
                source,
                group: group.clone(),
                dependencies: Vec::new(),
                origin,
            };
            match out.packages.iter_mut().find(|p| p.name == package.name) {
                Some(existing) => {
                    existing.group = existing.group.clone().stronger(package.group);
                }
                None => out.packages.push(package),
            }
        }
    }
    out.diagnostics.push(
        Diagnostic::info(
            Code::NoLockEdges,
            "Pipfile.lock does not record dependency edges; the dependency graph is flat",
        )
        .with_origin(Origin::new(file, 0)),
    );
    Ok(out)
}
