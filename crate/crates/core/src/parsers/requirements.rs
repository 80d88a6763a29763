//! requirements.txt and the files it includes.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::diagnostics::{Code, Diagnostic};
use crate::model::{normalize_name, DeclaredDependency, DependencyGroup, Origin};
use crate::requirement::{parse_requirement, source_for_url};
use crate::version::VersionSpec;

use super::archive::archive_name_version;
use super::vcs::{is_vcs_url, parse_vcs_url};
use super::ParseError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RequirementsParse {
    pub declared: Vec<DeclaredDependency>,
    pub diagnostics: Vec<Diagnostic>,
    /// Every file read, including `-r` includes, in reading order.
    pub files: Vec<PathBuf>,
}

/// Options that change how pip installs but not what it installs.
const IGNORED_OPTIONS: [&str; 14] = [
    "-i",
    "--index-url",
    "--extra-index-url",
    "--no-index",
    "-f",
    "--find-links",
    "--pre",
    "--prefer-binary",
    "--require-hashes",
    "--only-binary",
    "--no-binary",
    "--trusted-host",
    "--use-feature",
    "-Z",
];

/// Parse a requirements file. `file` is the path recorded in origins;
/// `base` is the directory `-r` paths resolve against. `chain` holds the
/// files currently being included and detects include cycles.
///
/// Unparseable lines become `A-PARSE-ERROR` diagnostics and are skipped;
/// only an include cycle or an unreadable include aborts.
pub fn parse_requirements(
    content: &str,
    file: &Path,
    base: &Path,
    chain: &mut Vec<PathBuf>,
) -> Result<RequirementsParse, ParseError> {
    let mut out = RequirementsParse {
        files: vec![file.to_path_buf()],
        ..Default::default()
    };
    chain.push(canonical(base, file));
    for (line_no, line) in logical_lines(content) {
        let origin = Origin::new(file, line_no);
        let line = strip_comment(&line);
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(target) = option_value(line, &["-r", "--requirement"]) {
            let path = file.parent().unwrap_or(Path::new("")).join(target);
            let key = canonical(base, &path);
            if let Some(pos) = chain.iter().position(|p| *p == key) {
                let mut cycle: Vec<PathBuf> = chain[pos..].to_vec();
                cycle.push(key);
                return Err(ParseError::IncludeCycle { cycle });
            }
            let text = std::fs::read_to_string(base.join(&path)).map_err(|e| ParseError::Io {
                file: path.clone(),
                message: e.to_string(),
            })?;
            let nested = parse_requirements(&text, &path, base, chain)?;
            out.declared.extend(nested.declared);
            out.diagnostics.extend(nested.diagnostics);
            out.files.extend(nested.files);
            continue;
        }
        if let Some(target) = option_value(line, &["-c", "--constraint"]) {
            out.diagnostics.push(
                Diagnostic::info(
                    Code::IgnoredOption,
                    format!("constraints file {target} only narrows versions; not read"),
                )
                .with_origin(origin),
            );
            continue;
        }
        if let Some(target) = option_value(line, &["-e", "--editable"]) {
            if !target.contains("://") {
                out.diagnostics.push(
                    Diagnostic::info(
                        Code::IgnoredOption,
                        format!("editable local path {target} is project source, not a dependency"),
                    )
                    .with_origin(origin),
                );
                continue;
            }
            match url_requirement(target, &origin) {
                Ok(d) => out.declared.push(d),
                Err(diag) => out.diagnostics.push(diag),
            }
            continue;
        }
        if line.starts_with('-') {
            let opt = line.split([' ', '=']).next().unwrap_or(line);
            let known = IGNORED_OPTIONS.contains(&opt);
            out.diagnostics.push(
                Diagnostic::info(
                    Code::IgnoredOption,
                    if known {
                        format!("option {opt} does not change the dependency set")
                    } else {
                        format!("unrecognized option {opt} ignored")
                    },
                )
                .with_origin(origin),
            );
            continue;
        }
        let line = strip_per_requirement_options(line);
        match requirement_line(&line, &origin) {
            Ok(d) => out.declared.push(d),
            Err(diag) => out.diagnostics.push(diag),
        }
    }
    chain.pop();
    Ok(out)
}

fn canonical(base: &Path, path: &Path) -> PathBuf {
    let joined = base.join(path);
    std::fs::canonicalize(&joined).unwrap_or(joined)
}

/// Join `\` continuations; yields (first physical line number, text).
fn logical_lines(content: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (i, raw) in content.lines().enumerate() {
        let (start, mut text) = current.take().unwrap_or((i + 1, String::new()));
        match raw.strip_suffix('\\') {
            Some(head) => {
                text.push_str(head);
                text.push(' ');
                current = Some((start, text));
            }
            None => {
                text.push_str(raw);
                out.push((start, text));
            }
        }
    }
    if let Some(last) = current {
        out.push(last);
    }
    out
}

/// `#` starts a comment at line start or after whitespace; `#egg=` in a
/// URL does not.
fn strip_comment(line: &str) -> String {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return line[..i].to_string();
        }
    }
    line.to_string()
}

fn option_value<'a>(line: &'a str, names: &[&str]) -> Option<&'a str> {
    for name in names {
        if let Some(rest) = line.strip_prefix(name) {
            if name.starts_with("--") {
                if let Some(v) = rest.strip_prefix('=') {
                    return Some(v.trim());
                }
            }
            if rest.starts_with(char::is_whitespace) {
                return Some(rest.trim());
            }
            // short options may be glued: -rother.txt
            if !name.starts_with("--") && !rest.is_empty() {
                return Some(rest.trim());
            }
        }
    }
    None
}

/// Drop `--hash=...` and similar trailing per-requirement options.
fn strip_per_requirement_options(line: &str) -> String {
    match line.find(" --") {
        Some(i) => line[..i].trim_end().to_string(),
        None => line.to_string(),
    }
}

fn parse_failure(origin: &Origin, message: String) -> Diagnostic {
    Diagnostic::error(Code::ParseError, message).with_origin(origin.clone())
}

fn requirement_line(line: &str, origin: &Origin) -> Result<DeclaredDependency, Diagnostic> {
    let first = line.split_whitespace().next().unwrap_or("");
    let bare_url = first
        .split_once("://")
        .is_some_and(|(scheme, _)| !scheme.contains('@'));
    if bare_url {
        return url_requirement(line, origin);
    }
    parse_requirement(line)
        .map(|r| r.into_declared(DependencyGroup::Required, origin.clone()))
        .map_err(|e| {
            Diagnostic::error(e.code(), format!("cannot parse requirement {line:?}: {e}"))
                .with_origin(origin.clone())
        })
}

/// A bare URL or path line: the name comes from `#egg=` or the archive
/// file name.
fn url_requirement(text: &str, origin: &Origin) -> Result<DeclaredDependency, Diagnostic> {
    let (url, marker) = match text.split_once(';') {
        Some((u, m)) => (u.trim(), Some(m.trim().to_string())),
        None => (text.trim(), None),
    };
    let (name, source) = if is_vcs_url(url) {
        let parsed = parse_vcs_url(url)
            .map_err(|e| parse_failure(origin, format!("cannot parse VCS URL: {e}")))?;
        let egg = parsed
            .egg
            .ok_or_else(|| parse_failure(origin, format!("VCS URL {url:?} has no #egg= name")))?;
        (egg, parsed.source)
    } else if url.contains("://") {
        let (name, _) = archive_name_version(url).ok_or_else(|| {
            parse_failure(origin, format!("cannot infer a project name from {url:?}"))
        })?;
        (name.raw().to_string(), source_for_url(url))
    } else {
        return Err(parse_failure(
            origin,
            format!("local path requirement {url:?} has no project name; not analyzed"),
        ));
    };
    let egg_name = name.split(['[', '=']).next().unwrap_or(&name).to_string();
    let name = normalize_name(&egg_name)
        .map_err(|e| parse_failure(origin, format!("bad project name {egg_name:?}: {e}")))?;
    Ok(DeclaredDependency {
        name,
        extras: BTreeSet::new(),
        spec: VersionSpec::empty(),
        source,
        group: DependencyGroup::Required,
        marker,
        origin: origin.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SourceKind, VcsType};

    fn parse(text: &str) -> RequirementsParse {
        parse_requirements(text, Path::new("requirements.txt"), Path::new("/nonexistent"), &mut Vec::new())
            .unwrap()
    }

    #[test]
    fn pinned_line() {
        let p = parse("docopt==0.6.2\n");
        assert_eq!(p.declared.len(), 1);
        let d = &p.declared[0];
        assert_eq!(d.name.as_str(), "docopt");
        assert_eq!(d.spec.to_string(), "==0.6.2");
        assert_eq!(d.source.kind, SourceKind::Registry);
        assert_eq!(d.group, DependencyGroup::Required);
        assert_eq!(d.origin.line, 1);
    }

    #[test]
    fn vcs_forms() {
        let sha = "6fdf8a4af28071ed1d079c01122b34c5d587207a";
        for line in [
            format!("black @ git+https://github.com/psf/black@{sha}"),
            format!("git+https://github.com/psf/black@{sha}#egg=black"),
            format!("-e git+https://github.com/psf/black@{sha}#egg=black"),
        ] {
            let p = parse(&line);
            assert_eq!(p.declared.len(), 1, "{line}");
            let d = &p.declared[0];
            assert_eq!(d.name.as_str(), "black");
            assert_eq!(d.source.vcs, Some(VcsType::Git));
            assert_eq!(d.source.reference.as_deref(), Some(sha));
        }
    }

    #[test]
    fn comments_continuations_markers_hashes() {
        let p = parse(
            "# header\nnumpy  # trailing\nmatplotlib>=3.5,\\\n  <4.0\nurllib3 ; python_version >= \"3.8\"\nsix==1.16.0 --hash=sha256:abc\n\n",
        );
        let names: Vec<_> = p.declared.iter().map(|d| d.name.to_string()).collect();
        assert_eq!(names, ["numpy", "matplotlib", "urllib3", "six"]);
        assert_eq!(p.declared[1].spec.to_string(), ">=3.5,<4.0");
        assert_eq!(p.declared[1].origin.line, 3);
        assert_eq!(p.declared[2].marker.as_deref(), Some("python_version >= \"3.8\""));
        assert_eq!(p.declared[3].spec.to_string(), "==1.16.0");
    }

    #[test]
    fn bare_archive_url() {
        let p = parse("https://example.com/p/docopt-0.6.2.tar.gz\n");
        assert_eq!(p.declared[0].name.as_str(), "docopt");
        assert_eq!(p.declared[0].source.kind, SourceKind::DirectUrl);
    }

    #[test]
    fn bad_lines_become_diagnostics() {
        let p = parse("numpy\nfoo >=1.0+x\n===\n--index-url https://x\ngit+https://h/r\n");
        assert_eq!(p.declared.len(), 1);
        let codes: Vec<_> = p.diagnostics.iter().map(|d| d.code.as_str()).collect();
        assert_eq!(codes, ["A-LOCAL-IN-SPEC", "A-PARSE-ERROR", "A-IGNORED-OPTION", "A-PARSE-ERROR"]);
        assert_eq!(p.diagnostics[0].origin.as_ref().unwrap().line, 2);
    }

    #[test]
    fn include_and_cycle() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "-r b.txt\nnumpy\n").unwrap();
        std::fs::write(dir.path().join("b.txt"), "six\n").unwrap();
        let text = std::fs::read_to_string(dir.path().join("a.txt")).unwrap();
        let p = parse_requirements(&text, Path::new("a.txt"), dir.path(), &mut Vec::new()).unwrap();
        let names: Vec<_> = p.declared.iter().map(|d| d.name.to_string()).collect();
        assert_eq!(names, ["six", "numpy"]);
        assert_eq!(p.declared[0].origin.file, Path::new("b.txt"));

        std::fs::write(dir.path().join("b.txt"), "-r a.txt\n").unwrap();
        let err = parse_requirements(&text, Path::new("a.txt"), dir.path(), &mut Vec::new()).unwrap_err();
        match err {
            ParseError::IncludeCycle { cycle } => assert_eq!(cycle.len(), 3),
            other => panic!("{other:?}"),
        }
    }
}
