//! Package URLs for PyPI components.

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use crate::model::{PackageName, ResolvedComponent, SourceKind, SourceRef};
use crate::version::Version;

/// Everything except unreserved characters is escaped.
const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'.').remove(b'-').remove(b'_').remove(b'~');

const PUBLIC_INDEXES: [&str; 3] = ["https://pypi.org", "https://pypi.org/simple", "https://pypi.python.org"];

fn enc(s: &str) -> String {
    utf8_percent_encode(s, COMPONENT).to_string()
}

pub fn make_purl(c: &ResolvedComponent) -> String {
    purl_for(&c.name, c.version.as_ref(), &c.source)
}

/// `pkg:pypi/<name>[@<version>][?qualifiers][#subpath]`.
///
/// VCS sources carry `vcs_url` then `ref`; direct URLs carry
/// `download_url`; registries other than the public index carry
/// `repository_url`.
pub fn purl_for(name: &PackageName, version: Option<&Version>, source: &SourceRef) -> String {
    let mut out = format!("pkg:pypi/{}", enc(name.normalized()));
    if let Some(v) = version {
        out.push('@');
        out.push_str(&enc(&v.to_string()));
    }
    let mut qualifiers: Vec<(&str, String)> = Vec::new();
    match source.kind {
        SourceKind::Registry => {
            if let Some(url) = &source.url {
                let trimmed = url.trim_end_matches('/');
                if !PUBLIC_INDEXES.contains(&trimmed) {
                    qualifiers.push(("repository_url", trimmed.to_string()));
                }
            }
        }
        SourceKind::Vcs => {
            if let Some(url) = source.vcs_url() {
                qualifiers.push(("vcs_url", url));
            }
            if let Some(r) = &source.reference {
                qualifiers.push(("ref", r.clone()));
            }
        }
        SourceKind::DirectUrl => {
            if let Some(url) = &source.url {
                qualifiers.push(("download_url", url.clone()));
            }
        }
        SourceKind::Path => {}
    }
    for (i, (k, v)) in qualifiers.iter().enumerate() {
        out.push(if i == 0 { '?' } else { '&' });
        out.push_str(k);
        out.push('=');
        out.push_str(&enc(v));
    }
    if let Some(sub) = &source.subdirectory {
        let segments: Vec<String> = sub
            .split('/')
            .filter(|s| !s.is_empty() && *s != "." && *s != "..")
            .map(enc)
            .collect();
        if !segments.is_empty() {
            out.push('#');
            out.push_str(&segments.join("/"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VcsType;
    use crate::version::parse_version;

    fn name(s: &str) -> PackageName {
        PackageName::new(s).unwrap()
    }

    #[test]
    fn registry() {
        let v = parse_version("1.26.4").unwrap();
        assert_eq!(purl_for(&name("numpy"), Some(&v), &SourceRef::registry()), "pkg:pypi/numpy@1.26.4");
        let v = parse_version("0.6.2").unwrap();
        assert_eq!(purl_for(&name("docopt"), Some(&v), &SourceRef::registry()), "pkg:pypi/docopt@0.6.2");
        assert_eq!(
            purl_for(&name("numpy"), Some(&v), &SourceRef::registry_at("https://pypi.org/")),
            "pkg:pypi/numpy@0.6.2"
        );
    }

    #[test]
    fn vcs_without_version() {
        let commit = "6fdf8a4af28071ed1d079c01122b34c5d587207a";
        let src = SourceRef::vcs(VcsType::Git, "https://github.com/psf/black", Some(commit.into()));
        assert_eq!(
            purl_for(&name("black"), None, &src),
            format!("pkg:pypi/black?vcs_url=git%2Bhttps%3A%2F%2Fgithub.com%2Fpsf%2Fblack&ref={commit}")
        );
    }

    #[test]
    fn names_are_normalized_and_local_escaped() {
        let v = parse_version("1.0+cpu").unwrap();
        assert_eq!(
            purl_for(&name("Typing_Extensions"), Some(&v), &SourceRef::registry()),
            "pkg:pypi/typing-extensions@1.0%2Bcpu"
        );
    }

    #[test]
    fn direct_url_and_subdirectory() {
        let mut src = SourceRef::direct_url("https://example.com/a-1.0.tar.gz");
        src.subdirectory = Some("pkg/sub".into());
        let v = parse_version("1.0").unwrap();
        assert_eq!(
            purl_for(&name("a"), Some(&v), &src),
            "pkg:pypi/a@1.0?download_url=https%3A%2F%2Fexample.com%2Fa-1.0.tar.gz#pkg/sub"
        );
    }

    proptest::proptest! {
        #[test]
        fn purl_is_pure_and_well_formed(
            raw in "[A-Za-z0-9]([A-Za-z0-9._-]{0,12}[A-Za-z0-9])?",
            release in proptest::collection::vec(0u64..30, 1..4),
            url in "https://[a-z]{1,8}\\.example/[a-z0-9 _+@#?&=-]{0,16}",
            kind in 0u8..4,
        ) {
            let v = crate::version::Version::new(release);
            let src = match kind {
                0 => SourceRef::registry(),
                1 => SourceRef::vcs(VcsType::Git, url.clone(), Some("abc".into())),
                2 => SourceRef::direct_url(url.clone()),
                _ => SourceRef::registry_at(url.clone()),
            };
            let a = purl_for(&name(&raw), Some(&v), &src);
            proptest::prop_assert_eq!(&a, &purl_for(&name(&raw), Some(&v), &src));
            let prefix = format!("pkg:pypi/{}@", name(&raw).normalized());
            proptest::prop_assert!(a.starts_with(&prefix));
            proptest::prop_assert!(!a.contains(' '));
            proptest::prop_assert!(a.matches('#').count() == 0);
        }
    }
}
