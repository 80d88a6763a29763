//! Project name and version from a distribution file name.

use crate::model::{normalize_name, PackageName};
use crate::version::{parse_version, Version};

const SDIST_SUFFIXES: [&str; 6] = [".tar.gz", ".tar.bz2", ".tar.xz", ".tgz", ".zip", ".tar"];

/// `docopt-0.6.2.tar.gz` → (docopt, 0.6.2); wheels use their first two
/// dash-separated fields. Query strings and fragments are ignored.
pub fn archive_name_version(url: &str) -> Option<(PackageName, Version)> {
    let path = url.split(['#', '?']).next()?;
    let file = path.rsplit('/').next()?;
    if let Some(stem) = file.strip_suffix(".whl") {
        let mut parts = stem.split('-');
        let name = normalize_name(parts.next()?).ok()?;
        let version = parse_version(parts.next()?).ok()?;
        return Some((name, version));
    }
    let lower = file.to_ascii_lowercase();
    let suffix = SDIST_SUFFIXES.iter().find(|s| lower.ends_with(*s))?;
    let stem = &file[..file.len() - suffix.len()];
    // the version is the shortest dash-separated tail that parses
    for (i, _) in stem.match_indices('-').collect::<Vec<_>>().into_iter().rev() {
        if let (Ok(name), Ok(version)) = (normalize_name(&stem[..i]), parse_version(&stem[i + 1..])) {
            return Some((name, version));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nv(url: &str) -> Option<(String, String)> {
        archive_name_version(url).map(|(n, v)| (n.to_string(), v.to_string()))
    }

    #[test]
    fn examples() {
        assert_eq!(
            nv("https://files.pythonhosted.org/packages/a2/55/x/docopt-0.6.2.tar.gz"),
            Some(("docopt".into(), "0.6.2".into()))
        );
        assert_eq!(
            nv("https://h/p/python_dateutil-2.8.2-py2.py3-none-any.whl#sha256=00"),
            Some(("python-dateutil".into(), "2.8.2".into()))
        );
        assert_eq!(nv("https://h/mypy-extensions-1.0.0.zip"), Some(("mypy-extensions".into(), "1.0.0".into())));
        assert_eq!(nv("https://h/readme.txt"), None);
        assert_eq!(nv("https://h/noversion.tar.gz"), None);
    }
}
