//! `<vcs>+<scheme>://host/path[@ref][#egg=name&subdirectory=dir]` URLs.

use thiserror::Error;

use crate::model::{SourceRef, VcsType};

const SCHEMES: [&str; 6] = ["https", "http", "ssh", "git", "file", "svn"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcsUrl {
    pub source: SourceRef,
    /// Project name from an `egg=` fragment.
    pub egg: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VcsUrlError {
    #[error("unrecognized VCS URL scheme in {0:?}; expected git+https://, hg+ssh:// and similar")]
    UnrecognizedScheme(String),
    #[error("VCS URL {0:?} has no host or path")]
    MissingPath(String),
}

pub fn is_vcs_url(url: &str) -> bool {
    url.split_once('+')
        .is_some_and(|(vcs, _)| VcsType::parse(vcs).is_some())
}

pub fn parse_vcs_url(url: &str) -> Result<VcsUrl, VcsUrlError> {
    let err = || VcsUrlError::UnrecognizedScheme(url.to_string());
    let (vcs, rest) = url.trim().split_once('+').ok_or_else(err)?;
    let vcs = VcsType::parse(vcs).ok_or_else(err)?;
    let (scheme, after_scheme) = rest.split_once("://").ok_or_else(err)?;
    if !SCHEMES.contains(&scheme.to_ascii_lowercase().as_str()) {
        return Err(err());
    }

    let (body, fragment) = match after_scheme.split_once('#') {
        Some((b, f)) => (b, Some(f)),
        None => (after_scheme, None),
    };
    // `@` inside the authority is user info (git@host); only an `@` in the
    // path introduces a ref.
    let path_start = body.find('/').unwrap_or(body.len());
    let (authority, path) = body.split_at(path_start);
    let (path, reference) = match path.rfind('@') {
        Some(at) => (&path[..at], Some(path[at + 1..].to_string())),
        None => (path, None),
    };
    if authority.is_empty() && path.is_empty() {
        return Err(VcsUrlError::MissingPath(url.to_string()));
    }

    let mut egg = None;
    let mut subdirectory = None;
    for pair in fragment.unwrap_or("").split('&') {
        match pair.split_once('=') {
            Some(("egg", v)) if !v.is_empty() => egg = Some(v.to_string()),
            Some(("subdirectory", v)) if !v.is_empty() => subdirectory = Some(v.to_string()),
            _ => {}
        }
    }

    let mut source = SourceRef::vcs(
        vcs,
        format!("{scheme}://{authority}{path}"),
        reference.filter(|r| !r.is_empty()),
    );
    source.subdirectory = subdirectory;
    Ok(VcsUrl { source, egg })
}

/// Inverse of [`parse_vcs_url`].
pub fn render_vcs_url(v: &VcsUrl) -> String {
    let mut out = v.source.vcs_url().unwrap_or_default();
    if let Some(r) = &v.source.reference {
        out.push('@');
        out.push_str(r);
    }
    let mut frag = Vec::new();
    if let Some(egg) = &v.egg {
        frag.push(format!("egg={egg}"));
    }
    if let Some(sub) = &v.source.subdirectory {
        frag.push(format!("subdirectory={sub}"));
    }
    if !frag.is_empty() {
        out.push('#');
        out.push_str(&frag.join("&"));
    }
    out
}
