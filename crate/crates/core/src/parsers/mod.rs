//! Discovery and parsing of every metadata surface in a project directory.

mod archive;
mod lock;
mod pyproject;
mod requirements;
pub(crate) mod vcs;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{Code, Diagnostic};
use crate::model::{DeclaredDependency, LockedPackage, Origin, SourceKind};

pub use archive::archive_name_version;
pub use lock::{parse_pdm_lock, parse_pipfile_lock, parse_poetry_lock, LockParse};
pub use pyproject::{parse_pyproject, poetry_constraint, PoetryConstraintError, PyprojectParse};
pub use requirements::{parse_requirements, RequirementsParse};
pub use vcs::{is_vcs_url, parse_vcs_url, render_vcs_url, VcsUrl, VcsUrlError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{}{}: {message}", file.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Syntax {
        file: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error("{}:{line}: {message}", file.display())]
    Shape {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("requirements include cycle: {}", cycle.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" -> "))]
    IncludeCycle { cycle: Vec<PathBuf> },
    #[error("cannot read {}: {message}", file.display())]
    Io { file: PathBuf, message: String },
}

impl ParseError {
    pub fn file(&self) -> Option<&Path> {
        match self {
            ParseError::Syntax { file, .. } | ParseError::Shape { file, .. } | ParseError::Io { file, .. } => {
                Some(file)
            }
            ParseError::IncludeCycle { cycle } => cycle.first().map(PathBuf::as_path),
        }
    }

    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. } => line.unwrap_or(0),
            ParseError::Shape { line, .. } => *line,
            _ => 0,
        }
    }

    fn into_diagnostic(self) -> Diagnostic {
        let origin = self.file().map(|f| Origin::new(f, self.line()));
        let d = Diagnostic::error(Code::ParseError, self.to_string());
        match origin {
            Some(o) => d.with_origin(o),
            None => d,
        }
    }
}

/// First 1-based line containing `needle`, or 0.
pub(crate) fn line_of(content: &str, needle: &str) -> usize {
    content
        .lines()
        .position(|l| l.contains(needle))
        .map(|i| i + 1)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LockDialect {
    Poetry,
    Pipenv,
    Pdm,
}

impl LockDialect {
    pub fn file_name(self) -> &'static str {
        match self {
            LockDialect::Poetry => "poetry.lock",
            LockDialect::Pipenv => "Pipfile.lock",
            LockDialect::Pdm => "pdm.lock",
        }
    }

    pub fn from_file_name(name: &str) -> Option<LockDialect> {
        [LockDialect::Poetry, LockDialect::Pipenv, LockDialect::Pdm]
            .into_iter()
            .find(|d| d.file_name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontendHint {
    Pip,
    Hatch,
    Pdm,
    Pipenv,
    Poetry,
}

impl fmt::Display for FrontendHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrontendHint::Pip => "pip",
            FrontendHint::Hatch => "hatch",
            FrontendHint::Pdm => "pdm",
            FrontendHint::Pipenv => "pipenv",
            FrontendHint::Poetry => "poetry",
        })
    }
}

/// Metadata files found in a project root. Paths are relative to the root.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscoveredFiles {
    pub pyproject: Option<PathBuf>,
    pub setup_py: Option<PathBuf>,
    pub requirements: Vec<PathBuf>,
    pub lockfiles: Vec<(LockDialect, PathBuf)>,
    pub pipfile: Option<PathBuf>,
}

impl DiscoveredFiles {
    pub fn is_empty(&self) -> bool {
        self.pyproject.is_none() && self.requirements.is_empty() && self.lockfiles.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("cannot read project directory {}: {source}", root.display())]
    Unreadable {
        root: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(
        "no dependency metadata in {}: looked for pyproject.toml, {}, poetry.lock, Pipfile.lock and pdm.lock",
        root.display(),
        requirements.join(", ")
    )]
    NoMetadata { root: PathBuf, requirements: Vec<String> },
    #[error("every metadata file in {} failed to parse: {}", root.display(), errors.join("; "))]
    AllFailed { root: PathBuf, errors: Vec<String> },
}

pub const DEFAULT_REQUIREMENTS: &str = "requirements.txt";

/// Scan `root` (not recursively) for metadata files.
pub fn discover(root: &Path, requirements_names: &[String]) -> Result<(DiscoveredFiles, Vec<Diagnostic>), ScanError> {
    let unreadable = |source| ScanError::Unreadable {
        root: root.to_path_buf(),
        source,
    };
    let mut names: Vec<String> = std::fs::read_dir(root)
        .map_err(unreadable)?
        .filter_map(Result::ok)
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();

    let mut files = DiscoveredFiles::default();
    let mut diags = Vec::new();
    for name in &names {
        let path = PathBuf::from(name);
        match name.as_str() {
            "pyproject.toml" => files.pyproject = Some(path),
            "setup.py" => files.setup_py = Some(path),
            "Pipfile" => files.pipfile = Some(path),
            _ => {
                if let Some(dialect) = LockDialect::from_file_name(name) {
                    files.lockfiles.push((dialect, path));
                } else if requirements_names.iter().any(|r| r == name) {
                    files.requirements.push(path);
                } else if name.ends_with(".lock") {
                    diags.push(
                        Diagnostic::warning(
                            Code::AmbiguousLockfile,
                            format!("{name} is not a known lockfile name (poetry.lock, Pipfile.lock, pdm.lock); not read"),
                        )
                        .with_origin(Origin::new(name, 0)),
                    );
                } else if is_requirements_like(name) {
                    diags.push(
                        Diagnostic::info(
                            Code::E3,
                            format!("{name} looks like a requirements file but is not in the configured names; pass it with --requirements-name to read it"),
                        )
                        .with_origin(Origin::new(name, 0)),
                    );
                }
            }
        }
    }
    // keep requirement files in the order they were configured
    files
        .requirements
        .sort_by_key(|p| requirements_names.iter().position(|r| Path::new(r) == p));

    match (&files.setup_py, &files.pyproject) {
        (Some(_), Some(_)) => diags.push(Diagnostic::warning(
            Code::E1,
            "both setup.py and pyproject.toml present; setup.py is detected but not executed, its dependencies are not analyzed",
        ).with_origin(Origin::new("setup.py", 0))),
        (Some(_), None) => diags.push(Diagnostic::warning(
            Code::E1,
            "setup.py without pyproject.toml; setup.py is not executed and its dependencies are not analyzed",
        ).with_origin(Origin::new("setup.py", 0))),
        (None, None) => diags.push(Diagnostic::info(
            Code::E1,
            "no build interface found: neither pyproject.toml nor setup.py",
        )),
        (None, Some(_)) => {}
    }
    if files.lockfiles.is_empty() {
        diags.push(Diagnostic::info(
            Code::E2,
            "no lockfile present; exact versions come from pins or index resolution",
        ));
    }
    if files.lockfiles.len() > 1 {
        let listed: Vec<String> = files.lockfiles.iter().map(|(_, p)| p.display().to_string()).collect();
        diags.push(Diagnostic::warning(
            Code::AmbiguousLockfile,
            format!("several lockfiles present ({}); all are read", listed.join(", ")),
        ));
    }
    Ok((files, diags))
}

fn is_requirements_like(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.contains("requirements") && (lower.ends_with(".txt") || lower.ends_with(".in"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    pub requirements_names: Vec<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            requirements_names: vec![DEFAULT_REQUIREMENTS.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectModel {
    pub root: PathBuf,
    pub files: DiscoveredFiles,
    pub declared: Vec<DeclaredDependency>,
    pub locked: Vec<LockedPackage>,
    /// Which lockfile each `locked` entry came from, parallel to `locked`.
    pub locked_dialects: Vec<LockDialect>,
    pub frontend_hint: Option<FrontendHint>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Discover and parse everything under `root`. Per-file failures become
/// diagnostics; the scan fails only when nothing could be parsed.
pub fn build_project_model(root: &Path, options: &ParseOptions) -> Result<ProjectModel, ScanError> {
    let (files, mut diagnostics) = discover(root, &options.requirements_names)?;
    if files.is_empty() {
        return Err(ScanError::NoMetadata {
            root: root.to_path_buf(),
            requirements: options.requirements_names.clone(),
        });
    }
    let read = |path: &Path| {
        std::fs::read_to_string(root.join(path)).map_err(|e| ParseError::Io {
            file: path.to_path_buf(),
            message: e.to_string(),
        })
    };

    let mut model = ProjectModel {
        root: root.to_path_buf(),
        files: files.clone(),
        declared: Vec::new(),
        locked: Vec::new(),
        locked_dialects: Vec::new(),
        frontend_hint: None,
        diagnostics: Vec::new(),
    };
    let mut parsed = 0usize;
    let mut errors = Vec::new();
    let mut pyproject_hint = None;

    if let Some(path) = &files.pyproject {
        match read(path).and_then(|text| parse_pyproject(&text, path)) {
            Ok(p) => {
                parsed += 1;
                diagnostics.push(
                    Diagnostic::info(Code::T1, "pyproject.toml parsed as a dependency source")
                        .with_origin(Origin::new(path, 0)),
                );
                if p.declared.iter().any(|d| d.group != crate::model::DependencyGroup::Required) {
                    diagnostics.push(
                        Diagnostic::info(Code::T4, "optional and development groups in pyproject.toml parsed")
                            .with_origin(Origin::new(path, 0)),
                    );
                }
                pyproject_hint = p.frontend_hint;
                model.declared.extend(p.declared);
                diagnostics.extend(p.diagnostics);
            }
            Err(e) => {
                errors.push(e.to_string());
                diagnostics.push(e.into_diagnostic());
            }
        }
    }

    for path in &files.requirements {
        let result = read(path).and_then(|text| parse_requirements(&text, path, root, &mut Vec::new()));
        match result {
            Ok(p) => {
                parsed += 1;
                model.declared.extend(p.declared);
                diagnostics.extend(p.diagnostics);
            }
            Err(e) => {
                errors.push(e.to_string());
                diagnostics.push(e.into_diagnostic());
            }
        }
    }

    for (dialect, path) in &files.lockfiles {
        let result = read(path).and_then(|text| match dialect {
            LockDialect::Poetry => parse_poetry_lock(&text, path),
            LockDialect::Pipenv => parse_pipfile_lock(&text, path),
            LockDialect::Pdm => parse_pdm_lock(&text, path),
        });
        match result {
            Ok(p) => {
                parsed += 1;
                diagnostics.push(
                    Diagnostic::info(Code::T2, format!("{} parsed as a dependency source", path.display()))
                        .with_origin(Origin::new(path, 0)),
                );
                if *dialect == LockDialect::Pipenv
                    && p.packages.iter().any(|p| p.group == crate::model::DependencyGroup::Development)
                {
                    diagnostics.push(
                        Diagnostic::info(Code::T4, "Pipfile.lock \"develop\" section parsed")
                            .with_origin(Origin::new(path, 0)),
                    );
                }
                model.locked_dialects.extend(std::iter::repeat_n(*dialect, p.packages.len()));
                model.locked.extend(p.packages);
                diagnostics.extend(p.diagnostics);
            }
            Err(e) => {
                errors.push(e.to_string());
                diagnostics.push(e.into_diagnostic());
            }
        }
    }

    if parsed == 0 {
        return Err(ScanError::AllFailed {
            root: root.to_path_buf(),
            errors,
        });
    }

    let vcs_seen = model
        .declared
        .iter()
        .map(|d| &d.source)
        .chain(model.locked.iter().map(|l| &l.source))
        .any(|s| s.kind == SourceKind::Vcs);
    if vcs_seen {
        diagnostics.push(Diagnostic::info(
            Code::T5,
            "VCS URLs decomposed into repository, VCS type and ref",
        ));
    }
    for d in &model.declared {
        if d.is_unversioned() && d.source.is_registry() {
            diagnostics.push(
                Diagnostic::info(Code::E9, format!("{} declared without a version", d.name))
                    .with_subject(d.name.clone())
                    .with_origin(d.origin.clone()),
            );
        }
    }

    model.frontend_hint = frontend_hint(&files, pyproject_hint);
    if files.lockfiles.is_empty() && matches!(model.frontend_hint, Some(FrontendHint::Pip | FrontendHint::Hatch)) {
        diagnostics.push(Diagnostic::info(
            Code::E5,
            format!("{} does not create a lockfile", model.frontend_hint.unwrap()),
        ));
    }
    crate::diagnostics::normalize(&mut diagnostics);
    model.diagnostics = diagnostics;
    Ok(model)
}

fn frontend_hint(files: &DiscoveredFiles, pyproject: Option<FrontendHint>) -> Option<FrontendHint> {
    let lock = files.lockfiles.first().map(|(d, _)| match d {
        LockDialect::Poetry => FrontendHint::Poetry,
        LockDialect::Pipenv => FrontendHint::Pipenv,
        LockDialect::Pdm => FrontendHint::Pdm,
    });
    lock.or(files.pipfile.as_ref().map(|_| FrontendHint::Pipenv))
        .or(pyproject.filter(|h| *h == FrontendHint::Poetry))
        .or((!files.requirements.is_empty()).then_some(FrontendHint::Pip))
        .or(pyproject)
}
