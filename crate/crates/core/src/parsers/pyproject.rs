//! pyproject.toml: PEP 621 tables, Poetry tables, PDM dev-dependencies
//! and PEP 735 dependency groups.

use std::collections::BTreeSet;
use std::path::Path;

use toml::{Table, Value};

use crate::diagnostics::{Code, Diagnostic};
use crate::model::{
    normalize_name, DeclaredDependency, DependencyGroup, Origin, SourceRef, VcsType,
};
use crate::requirement::{parse_requirement, source_for_url};
use crate::version::{parse_specifier_set, parse_version, VersionError, VersionSpec};

use super::{line_of, FrontendHint, ParseError};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PyprojectParse {
    pub declared: Vec<DeclaredDependency>,
    pub frontend_hint: Option<FrontendHint>,
    pub diagnostics: Vec<Diagnostic>,
}

struct Ctx<'a> {
    content: &'a str,
    file: &'a Path,
    out: PyprojectParse,
}

impl Ctx<'_> {
    fn origin(&self, needle: &str) -> Origin {
        Origin::new(self.file, line_of(self.content, needle))
    }

    fn requirement(&mut self, text: &str, group: DependencyGroup) {
        let quoted = format!("\"{text}\"");
        let origin = match line_of(self.content, &quoted) {
            0 => self.origin(text),
            line => Origin::new(self.file, line),
        };
        match parse_requirement(text) {
            Ok(r) => self.out.declared.push(r.into_declared(group, origin)),
            Err(e) => self.out.diagnostics.push(
                Diagnostic::error(e.code(), format!("cannot parse requirement {text:?}: {e}"))
                    .with_origin(origin),
            ),
        }
    }

    fn requirement_list(&mut self, value: &Value, group: DependencyGroup, table: &str) {
        let Some(items) = value.as_array() else {
            self.out.diagnostics.push(
                Diagnostic::error(Code::ParseError, format!("{table} is not an array"))
                    .with_origin(Origin::new(self.file, 0)),
            );
            return;
        };
        for item in items {
            match item {
                Value::String(s) => self.requirement(s, group.clone()),
                // `{include-group = "..."}` in PEP 735 groups; the included
                // group is read on its own.
                Value::Table(_) => {}
                other => self.out.diagnostics.push(
                    Diagnostic::error(Code::ParseError, format!("unexpected entry {other} in {table}"))
                        .with_origin(Origin::new(self.file, 0)),
                ),
            }
        }
    }
}

/// Parse pyproject.toml content. `file` is recorded in origins.
pub fn parse_pyproject(content: &str, file: &Path) -> Result<PyprojectParse, ParseError> {
    let doc: Table = toml::from_str(content).map_err(|e| ParseError::Syntax {
        file: file.to_path_buf(),
        line: e.span().map(|s| content[..s.start].lines().count().max(1)),
        message: e.message().to_string(),
    })?;
    let mut ctx = Ctx {
        content,
        file,
        out: PyprojectParse::default(),
    };
    let mut has_groups = false;

    if let Some(project) = doc.get("project").and_then(Value::as_table) {
        if let Some(deps) = project.get("dependencies") {
            ctx.requirement_list(deps, DependencyGroup::Required, "project.dependencies");
        }
        if let Some(opt) = project.get("optional-dependencies").and_then(Value::as_table) {
            for (extra, deps) in opt {
                has_groups = true;
                let group = DependencyGroup::Optional(extra_name(extra));
                ctx.requirement_list(deps, group, "project.optional-dependencies");
            }
        }
    }

    if let Some(groups) = doc.get("dependency-groups").and_then(Value::as_table) {
        for (_, deps) in groups {
            has_groups = true;
            ctx.requirement_list(deps, DependencyGroup::Development, "dependency-groups");
        }
    }

    let tool = doc.get("tool").and_then(Value::as_table);
    let poetry = tool.and_then(|t| t.get("poetry")).and_then(Value::as_table);
    let pdm = tool.and_then(|t| t.get("pdm")).and_then(Value::as_table);
    let hatch = tool.and_then(|t| t.get("hatch")).and_then(Value::as_table);

    if let Some(poetry) = poetry {
        let extras_of = poetry_extras(poetry);
        if let Some(deps) = poetry.get("dependencies").and_then(Value::as_table) {
            for (name, spec) in deps {
                if name == "python" {
                    continue;
                }
                poetry_dependency(&mut ctx, name, spec, DependencyGroup::Required, &extras_of);
            }
        }
        if let Some(deps) = poetry.get("dev-dependencies").and_then(Value::as_table) {
            has_groups = true;
            for (name, spec) in deps {
                poetry_dependency(&mut ctx, name, spec, DependencyGroup::Development, &extras_of);
            }
        }
        if let Some(groups) = poetry.get("group").and_then(Value::as_table) {
            for (group_name, body) in groups {
                has_groups = true;
                let group = if group_name == "dev" {
                    DependencyGroup::Development
                } else {
                    DependencyGroup::Optional(extra_name(group_name))
                };
                let deps = body.get("dependencies").and_then(Value::as_table);
                for (name, spec) in deps.into_iter().flatten() {
                    poetry_dependency(&mut ctx, name, spec, group.clone(), &extras_of);
                }
            }
        }
    }

    if let Some(dev) = pdm.and_then(|p| p.get("dev-dependencies")).and_then(Value::as_table) {
        for (_, deps) in dev {
            has_groups = true;
            ctx.requirement_list(deps, DependencyGroup::Development, "tool.pdm.dev-dependencies");
        }
    }

    if has_groups {
        ctx.out.diagnostics.push(
            Diagnostic::info(
                Code::E6,
                "optional groups mapped: PEP 621 extras and non-dev Poetry groups are optional; \
                 Poetry dev group, PDM dev-dependencies and dependency-groups are development",
            )
            .with_origin(Origin::new(file, 0)),
        );
    }

    let backend = doc
        .get("build-system")
        .and_then(|b| b.get("build-backend"))
        .and_then(Value::as_str)
        .unwrap_or("");
    ctx.out.frontend_hint = if poetry.is_some() {
        Some(FrontendHint::Poetry)
    } else if pdm.is_some_and(|p| p.contains_key("dev-dependencies") || p.contains_key("scripts")) {
        Some(FrontendHint::Pdm)
    } else if hatch.is_some_and(|h| h.contains_key("envs")) {
        Some(FrontendHint::Hatch)
    } else if backend.starts_with("poetry") {
        Some(FrontendHint::Poetry)
    } else {
        None
    };
    Ok(ctx.out)
}

fn extra_name(raw: &str) -> String {
    normalize_name(raw)
        .map(|n| n.normalized().to_string())
        .unwrap_or_else(|_| raw.to_string())
}

/// Poetry `[tool.poetry.extras]`: extra → package names.
fn poetry_extras(poetry: &Table) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Some(extras) = poetry.get("extras").and_then(Value::as_table) {
        for (extra, names) in extras {
            for name in names.as_array().into_iter().flatten().filter_map(Value::as_str) {
                if let Ok(n) = normalize_name(name) {
                    out.push((n.normalized().to_string(), extra_name(extra)));
                }
            }
        }
    }
    out
}

fn poetry_dependency(
    ctx: &mut Ctx<'_>,
    raw_name: &str,
    value: &Value,
    group: DependencyGroup,
    extras_of: &[(String, String)],
) {
    let origin = ctx.origin(&format!("{raw_name} ="));
    let name = match normalize_name(raw_name) {
        Ok(n) => n,
        Err(e) => {
            ctx.out.diagnostics.push(
                Diagnostic::error(Code::ParseError, format!("bad dependency name {raw_name:?}: {e}"))
                    .with_origin(origin),
            );
            return;
        }
    };
    let entries: Vec<&Value> = match value {
        Value::Array(items) => items.iter().collect(),
        other => vec![other],
    };
    for entry in entries {
        let mut spec = VersionSpec::empty();
        let mut source = SourceRef::registry();
        let mut extras = BTreeSet::new();
        let mut marker = None;
        let mut group = group.clone();
        let constraint = match entry {
            Value::String(s) => Some(s.as_str()),
            Value::Table(t) => {
                if let Some(url) = t.get("git").and_then(Value::as_str) {
                    let reference = ["rev", "tag", "branch"]
                        .iter()
                        .find_map(|k| t.get(*k).and_then(Value::as_str))
                        .map(str::to_string);
                    source = SourceRef::vcs(VcsType::Git, url.trim_start_matches("git+"), reference);
                    source.subdirectory = t.get("subdirectory").and_then(Value::as_str).map(str::to_string);
                } else if let Some(url) = t.get("url").and_then(Value::as_str) {
                    source = source_for_url(url);
                } else if let Some(path) = t.get("path").and_then(Value::as_str) {
                    source = SourceRef::path(path);
                }
                for e in t.get("extras").and_then(Value::as_array).into_iter().flatten() {
                    if let Some(e) = e.as_str() {
                        extras.insert(extra_name(e));
                    }
                }
                let mut markers = Vec::new();
                if let Some(m) = t.get("markers").and_then(Value::as_str) {
                    markers.push(format!("({m})"));
                }
                if let Some(py) = t.get("python").and_then(Value::as_str) {
                    if let Some(m) = python_marker(py) {
                        markers.push(m);
                    }
                }
                if !markers.is_empty() {
                    marker = Some(markers.join(" and "));
                }
                if t.get("optional").and_then(Value::as_bool) == Some(true)
                    && group == DependencyGroup::Required
                {
                    let extra = extras_of
                        .iter()
                        .find(|(n, _)| n == name.normalized())
                        .map(|(_, e)| e.clone())
                        .unwrap_or_else(|| "optional".to_string());
                    group = DependencyGroup::Optional(extra);
                }
                t.get("version").and_then(Value::as_str)
            }
            other => {
                ctx.out.diagnostics.push(
                    Diagnostic::error(
                        Code::ParseError,
                        format!("unsupported constraint {other} for {raw_name}"),
                    )
                    .with_origin(origin.clone()),
                );
                continue;
            }
        };
        if let Some(c) = constraint {
            match poetry_constraint(c) {
                Ok(s) => spec = s,
                Err(PoetryConstraintError::Unsupported(text)) => ctx.out.diagnostics.push(
                    Diagnostic::warning(
                        Code::UnsupportedConstraint,
                        format!("constraint {text:?} uses `||`; treated as unversioned"),
                    )
                    .with_subject(name.clone())
                    .with_origin(origin.clone()),
                ),
                Err(PoetryConstraintError::Version(e)) => {
                    ctx.out.diagnostics.push(
                        Diagnostic::error(e.code(), format!("constraint {c:?} for {raw_name}: {e}"))
                            .with_subject(name.clone())
                            .with_origin(origin.clone()),
                    );
                    continue;
                }
            }
        }
        ctx.out.declared.push(DeclaredDependency {
            name: name.clone(),
            extras,
            spec,
            source,
            group,
            marker,
            origin: origin.clone(),
        });
    }
}

/// `python = "^3.8"` on a dependency becomes a python_version marker made
/// of the expanded clauses.
fn python_marker(constraint: &str) -> Option<String> {
    let spec = poetry_constraint(constraint).ok()?;
    if spec.is_empty() {
        return None;
    }
    let parts: Vec<String> = spec
        .clauses()
        .iter()
        .map(|c| format!("python_version {} \"{}{}\"", c.operator(), c.version(), if c.is_wildcard() { ".*" } else { "" }))
        .collect();
    Some(parts.join(" and "))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoetryConstraintError {
    /// `||` alternatives cannot be expressed as one clause set.
    Unsupported(String),
    Version(VersionError),
}

impl From<VersionError> for PoetryConstraintError {
    fn from(e: VersionError) -> Self {
        PoetryConstraintError::Version(e)
    }
}

/// Expand Poetry constraint syntax into standard clauses.
///
/// `^1.2.3` → `>=1.2.3,<2.0.0`, `^0.2.3` → `>=0.2.3,<0.3.0`,
/// `~1.2.3` → `>=1.2.3,<1.3.0`, `~1` → `>=1,<2`, `1.2.3` → `==1.2.3`,
/// `*` → unversioned. Parts may be separated by commas or spaces.
pub fn poetry_constraint(text: &str) -> Result<VersionSpec, PoetryConstraintError> {
    let text = text.trim();
    if text.contains("||") || text.contains('|') {
        return Err(PoetryConstraintError::Unsupported(text.to_string()));
    }
    let mut clauses = Vec::new();
    for part in split_parts(text) {
        if part == "*" {
            continue;
        }
        if let Some(rest) = part.strip_prefix('^') {
            let v = parse_version(rest.trim())?;
            let r = v.release();
            let first_nonzero = r.iter().position(|&n| n != 0);
            let bump = match first_nonzero {
                Some(i) if i < r.len() => i,
                // all zeros: ^0 → <1, ^0.0 → <0.1, ^0.0.0 → <0.0.1
                _ => r.len() - 1,
            };
            clauses.push(format!(">={v}"));
            clauses.push(format!("<{}", bumped(r, bump)));
        } else if let Some(rest) = part.strip_prefix('~').filter(|r| !r.starts_with('=')) {
            let v = parse_version(rest.trim())?;
            let r = v.release();
            let bump = if r.len() >= 2 { 1 } else { 0 };
            clauses.push(format!(">={v}"));
            clauses.push(format!("<{}", bumped(r, bump)));
        } else if part.starts_with(['<', '>', '=', '!', '~']) {
            clauses.push(part.replace(' ', ""));
        } else {
            clauses.push(format!("=={part}"));
        }
    }
    Ok(parse_specifier_set(&clauses.join(","))?)
}

/// Increment segment `at`, zero everything after it, keep the length.
fn bumped(release: &[u64], at: usize) -> String {
    release
        .iter()
        .enumerate()
        .map(|(i, n)| match i.cmp(&at) {
            std::cmp::Ordering::Less => n.to_string(),
            std::cmp::Ordering::Equal => (n + 1).to_string(),
            std::cmp::Ordering::Greater => "0".to_string(),
        })
        .collect::<Vec<_>>()
        .join(".")
}

/// Split on commas, and on whitespace between complete parts so that
/// `>= 1.2 < 2` yields two parts.
fn split_parts(text: &str) -> Vec<String> {
    let is_op = |s: &str| s.chars().all(|c| "<>=!~^".contains(c));
    let mut parts = Vec::new();
    for chunk in text.split(',') {
        let mut current = String::new();
        for token in chunk.split_whitespace() {
            if token.starts_with(['<', '>', '=', '!', '~', '^']) && !current.is_empty() && !is_op(&current) {
                parts.push(std::mem::take(&mut current));
            }
            current.push_str(token);
        }
        if !current.is_empty() {
            parts.push(current);
        }
    }
    parts
}
