//! CycloneDX 1.5 JSON output and the diagnostic sidecar report.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

use crate::diagnostics::{self, Diagnostic};
use crate::model::{PackageName, Resolution, ResolvedComponent, Scope, SourceKind};

pub const SPEC_VERSION: &str = "1.5";
pub const PROPERTY_PREFIX: &str = "pysbom";

/// Namespace for content-derived serial numbers.
const SERIAL_NAMESPACE: Uuid = Uuid::from_u128(0x6b1d_5a52_93c4_4f0e_9a51_7c0c_2e3f_b0d4);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Xml,
    Protobuf,
}

impl std::str::FromStr for Format {
    type Err = EmitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "xml" => Ok(Format::Xml),
            "protobuf" | "proto" => Ok(Format::Protobuf),
            other => Err(EmitError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("duplicate bom-ref {0}")]
    DuplicateRef(String),
    #[error("dependency edge {parent} -> {child} names a package that is not a component")]
    DanglingEdge { parent: String, child: String },
    #[error("output format {0} is not supported; only CycloneDX JSON is produced")]
    UnsupportedFormat(String),
}

/// Everything about the document that is not a component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BomMetadata {
    pub tool_name: String,
    pub tool_version: String,
    pub root_name: String,
    pub root_version: Option<String>,
    /// Ignored in deterministic mode.
    pub timestamp: Option<DateTime<Utc>>,
}

impl BomMetadata {
    pub fn new(root_name: impl Into<String>) -> Self {
        BomMetadata {
            tool_name: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            root_name: root_name.into(),
            root_version: None,
            timestamp: None,
        }
    }
}

pub fn check_format(format: Format) -> Result<(), EmitError> {
    match format {
        Format::Json => Ok(()),
        Format::Xml => Err(EmitError::UnsupportedFormat("xml".into())),
        Format::Protobuf => Err(EmitError::UnsupportedFormat("protobuf".into())),
    }
}

/// bom-ref for every component, keyed by name. Version-less components
/// get a `noversion=<n>` qualifier numbered in purl order.
pub fn bom_refs(components: &[ResolvedComponent]) -> Result<BTreeMap<PackageName, String>, EmitError> {
    let mut seen_purls = BTreeSet::new();
    for c in components {
        if !seen_purls.insert(c.purl.as_str()) {
            return Err(EmitError::DuplicateRef(c.purl.clone()));
        }
    }
    let mut unversioned: Vec<&ResolvedComponent> = components.iter().filter(|c| c.version.is_none()).collect();
    unversioned.sort_by(|a, b| a.purl.cmp(&b.purl));
    let mut refs = BTreeMap::new();
    let mut insert = |name: &PackageName, r: String| {
        if refs.insert(name.clone(), r.clone()).is_some() {
            return Err(EmitError::DuplicateRef(r));
        }
        Ok(())
    };
    for (i, c) in unversioned.iter().enumerate() {
        insert(&c.name, with_qualifier(&c.purl, &format!("noversion={}", i + 1)))?;
    }
    for c in components.iter().filter(|c| c.version.is_some()) {
        insert(&c.name, c.purl.clone())?;
    }
    Ok(refs)
}

fn with_qualifier(purl: &str, qualifier: &str) -> String {
    let (body, subpath) = match purl.split_once('#') {
        Some((b, s)) => (b, Some(s)),
        None => (purl, None),
    };
    let sep = if body.contains('?') { '&' } else { '?' };
    match subpath {
        Some(s) => format!("{body}{sep}{qualifier}#{s}"),
        None => format!("{body}{sep}{qualifier}"),
    }
}

fn property(name: &str, value: impl Into<String>) -> Value {
    json!({ "name": format!("{PROPERTY_PREFIX}:{name}"), "value": value.into() })
}

fn cdx_scope(scope: Scope) -> &'static str {
    match scope {
        Scope::Required => "required",
        Scope::Optional => "optional",
        Scope::ExcludedDev => "excluded",
    }
}

fn cdx_hash_alg(alg: &str) -> Option<&'static str> {
    Some(match alg {
        "md5" => "MD5",
        "sha1" => "SHA-1",
        "sha256" => "SHA-256",
        "sha384" => "SHA-384",
        "sha512" => "SHA-512",
        _ => return None,
    })
}

fn render_component(c: &ResolvedComponent, bom_ref: &str, deterministic: bool) -> Value {
    let mut obj = Map::new();
    obj.insert("type".into(), json!("library"));
    obj.insert("bom-ref".into(), json!(bom_ref));
    obj.insert("name".into(), json!(c.name.as_str()));
    if let Some(v) = &c.version {
        obj.insert("version".into(), json!(v.to_string()));
    }
    obj.insert("scope".into(), json!(cdx_scope(c.scope)));
    let hashes: Vec<Value> = c
        .hashes
        .iter()
        .filter_map(|h| cdx_hash_alg(&h.algorithm).map(|alg| (alg, &h.digest)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|(alg, content)| json!({ "alg": alg, "content": content }))
        .collect();
    if !hashes.is_empty() {
        obj.insert("hashes".into(), Value::Array(hashes));
    }
    obj.insert("purl".into(), json!(c.purl));
    let external = match c.source.kind {
        SourceKind::Vcs => c.source.vcs_url().map(|url| json!({ "type": "vcs", "url": url })),
        SourceKind::DirectUrl => c.source.url.as_ref().map(|url| json!({ "type": "distribution", "url": url })),
        SourceKind::Registry | SourceKind::Path => None,
    };
    if let Some(e) = external {
        obj.insert("externalReferences".into(), json!([e]));
    }
    let mut props = vec![
        property("resolution", c.resolution.label()),
        property("group", c.scope.as_str()),
        property("reach", c.reach.as_str()),
    ];
    if let Resolution::Resolved { at, as_of } = &c.resolution {
        if *as_of || !deterministic {
            props.push(property("resolved-at", at.to_rfc3339_opts(SecondsFormat::Secs, true)));
        }
    }
    if let Some(origin) = &c.origin {
        props.push(property("origin", origin.to_string().replace('\\', "/")));
    }
    if let Some(r) = &c.source.reference {
        props.push(property("vcs-ref", r.clone()));
    }
    obj.insert("properties".into(), Value::Array(props));
    Value::Object(obj)
}

fn diagnostic_line(d: &Diagnostic) -> String {
    let mut line = format!("{} {} {} {}", d.code, d.severity, d.subject_str(), d.message);
    if let Some(o) = &d.origin {
        line.push_str(&format!(" ({})", o.to_string().replace('\\', "/")));
    }
    line
}

/// Serialize a CycloneDX 1.5 document. `edges` are (parent, child) name
/// pairs; direct components hang off the root component.
///
/// In deterministic mode the timestamp is dropped, non-snapshot resolution
/// times are omitted, and the serial number is derived from the content,
/// so equal inputs in any order give identical bytes.
pub fn emit(
    components: &[ResolvedComponent],
    edges: &BTreeSet<(PackageName, PackageName)>,
    diagnostics: &[Diagnostic],
    metadata: &BomMetadata,
    deterministic: bool,
) -> Result<Vec<u8>, EmitError> {
    let refs = bom_refs(components)?;
    let root_ref = format!("{PROPERTY_PREFIX}-root:{}", metadata.root_name);

    let mut sorted: Vec<(&String, &ResolvedComponent)> =
        components.iter().map(|c| (&refs[&c.name], c)).collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));

    let mut children: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (parent, child) in edges {
        let (Some(p), Some(c)) = (refs.get(parent), refs.get(child)) else {
            return Err(EmitError::DanglingEdge {
                parent: parent.to_string(),
                child: child.to_string(),
            });
        };
        children.entry(p.as_str()).or_default().insert(c.as_str());
    }
    let direct: BTreeSet<&str> = sorted
        .iter()
        .filter(|(_, c)| c.reach == crate::model::Reach::Direct)
        .map(|(r, _)| r.as_str())
        .collect();

    let mut dependencies = vec![json!({ "ref": root_ref, "dependsOn": direct })];
    for (r, _) in &sorted {
        let deps = children.get(r.as_str()).cloned().unwrap_or_default();
        dependencies.push(json!({ "ref": r, "dependsOn": deps }));
    }

    let mut diags = diagnostics.to_vec();
    diagnostics::normalize(&mut diags);
    let doc_props: Vec<Value> = diags.iter().map(|d| property("diagnostic", diagnostic_line(d))).collect();

    let mut meta = Map::new();
    if !deterministic {
        let ts = metadata.timestamp.unwrap_or_else(Utc::now);
        meta.insert("timestamp".into(), json!(ts.to_rfc3339_opts(SecondsFormat::Secs, true)));
    }
    meta.insert(
        "tools".into(),
        json!({ "components": [{
            "type": "application",
            "name": metadata.tool_name,
            "version": metadata.tool_version,
        }]}),
    );
    let mut root = Map::new();
    root.insert("type".into(), json!("application"));
    root.insert("bom-ref".into(), json!(root_ref));
    root.insert("name".into(), json!(metadata.root_name));
    if let Some(v) = &metadata.root_version {
        root.insert("version".into(), json!(v));
    }
    meta.insert("component".into(), Value::Object(root));
    if !doc_props.is_empty() {
        meta.insert("properties".into(), Value::Array(doc_props));
    }

    let body = json!({
        "metadata": Value::Object(meta),
        "components": sorted.iter().map(|(r, c)| render_component(c, r, deterministic)).collect::<Vec<_>>(),
        "dependencies": dependencies,
    });

    let serial = if deterministic {
        let digest = Sha256::digest(serde_json::to_vec(&body).expect("json values serialize"));
        Uuid::new_v5(&SERIAL_NAMESPACE, &digest)
    } else {
        Uuid::new_v4()
    };

    let mut doc = Map::new();
    doc.insert("bomFormat".into(), json!("CycloneDX"));
    doc.insert("specVersion".into(), json!(SPEC_VERSION));
    doc.insert("serialNumber".into(), json!(serial.urn().to_string()));
    doc.insert("version".into(), json!(1));
    if let Value::Object(b) = body {
        doc.extend(b);
    }
    let mut out = serde_json::to_vec_pretty(&Value::Object(doc)).expect("json values serialize");
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagFormat {
    Json,
    Text,
}

/// Render diagnostics sorted by code, then subject.
pub fn emit_diagnostics(diags: &[Diagnostic], format: DiagFormat) -> Vec<u8> {
    let mut diags = diags.to_vec();
    diagnostics::normalize(&mut diags);
    match format {
        DiagFormat::Text => {
            let mut out = String::new();
            for d in &diags {
                out.push_str(&diagnostic_line(d));
                out.push('\n');
            }
            out.into_bytes()
        }
        DiagFormat::Json => {
            let entries: Vec<Value> = diags
                .iter()
                .map(|d| {
                    json!({
                        "code": d.code.as_str(),
                        "severity": d.severity.as_str(),
                        "subject": d.subject.as_ref().map(|s| s.as_str()),
                        "message": d.message,
                        "file": d.origin.as_ref().map(|o| o.file.display().to_string().replace('\\', "/")),
                        "line": d.origin.as_ref().map(|o| o.line).filter(|l| *l > 0),
                        "meaning": d.code.meaning(),
                    })
                })
                .collect();
            let mut out = serde_json::to_vec_pretty(&json!({ "diagnostics": entries })).expect("json values serialize");
            out.push(b'\n');
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Code;
    use crate::model::{normalize_name, Origin, Reach, SourceRef, VcsType};

    fn comp(name: &str, version: Option<&str>, source: SourceRef) -> ResolvedComponent {
        ResolvedComponent::new(
            normalize_name(name).unwrap(),
            version.map(|v| v.parse().unwrap()),
            source,
            Scope::Required,
            Reach::Direct,
            Resolution::Pinned,
        )
    }

    fn parse(bytes: &[u8]) -> Value {
        serde_json::from_slice(bytes).unwrap()
    }

    #[test]
    fn empty_document() {
        let out = emit(&[], &BTreeSet::new(), &[], &BomMetadata::new("demo"), true).unwrap();
        let doc = parse(&out);
        assert_eq!(doc["specVersion"], "1.5");
        assert_eq!(doc["components"], json!([]));
        assert!(doc["metadata"].get("timestamp").is_none());
    }

    #[test]
    fn refs_and_noversion() {
        let cs = vec![
            comp("numpy", None, SourceRef::registry()),
            comp("docopt", Some("0.6.2"), SourceRef::registry()),
            comp("black", None, SourceRef::vcs(VcsType::Git, "https://github.com/psf/black", Some("abc".into()))),
        ];
        let refs = bom_refs(&cs).unwrap();
        assert_eq!(refs[&normalize_name("docopt").unwrap()], "pkg:pypi/docopt@0.6.2");
        assert_eq!(refs[&normalize_name("numpy").unwrap()], "pkg:pypi/numpy?noversion=2");
        assert!(refs[&normalize_name("black").unwrap()].ends_with("&ref=abc&noversion=1"));
        let dup = vec![cs[1].clone(), cs[1].clone()];
        assert!(matches!(bom_refs(&dup), Err(EmitError::DuplicateRef(_))));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let mut cs = vec![
            comp("a", Some("1.0"), SourceRef::registry()),
            comp("b", Some("2.0"), SourceRef::registry()),
        ];
        cs[1].reach = Reach::Transitive;
        let edges: BTreeSet<_> = [(cs[0].name.clone(), cs[1].name.clone())].into();
        let meta = BomMetadata::new("demo");
        let one = emit(&cs, &edges, &[], &meta, true).unwrap();
        cs.reverse();
        let two = emit(&cs, &edges, &[], &meta, true).unwrap();
        assert_eq!(one, two);
        assert!(!one.contains(&b'\r'));
        let doc = parse(&one);
        assert_eq!(doc["dependencies"][0]["dependsOn"], json!(["pkg:pypi/a@1.0"]));
        assert_eq!(doc["dependencies"][1]["dependsOn"], json!(["pkg:pypi/b@2.0"]));
        assert!(emit(&cs, &edges, &[], &meta, false).unwrap() != one);
    }

    #[test]
    fn guessed_component_carries_provenance() {
        let mut c = comp("x", Some("1.2.3"), SourceRef::registry());
        c.resolution = Resolution::Guessed;
        c.origin = Some(Origin::new("requirements.txt", 3));
        let d = Diagnostic::warning(Code::T6, "guessed").with_subject(c.name.clone());
        let doc = parse(&emit(&[c], &BTreeSet::new(), &[d], &BomMetadata::new("demo"), true).unwrap());
        let props = doc["components"][0]["properties"].as_array().unwrap();
        assert!(props.contains(&json!({"name": "pysbom:resolution", "value": "guessed"})));
        assert!(props.contains(&json!({"name": "pysbom:origin", "value": "requirements.txt:3"})));
        let meta = doc["metadata"]["properties"][0]["value"].as_str().unwrap();
        assert!(meta.starts_with("T6 warning x"));
    }

    #[test]
    fn dangling_edge_is_an_error() {
        let cs = vec![comp("a", Some("1"), SourceRef::registry())];
        let edges: BTreeSet<_> = [(cs[0].name.clone(), normalize_name("zzz").unwrap())].into();
        assert!(matches!(
            emit(&cs, &edges, &[], &BomMetadata::new("demo"), true),
            Err(EmitError::DanglingEdge { .. })
        ));
    }

    #[test]
    fn formats() {
        assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
        let err = check_format("xml".parse().unwrap()).unwrap_err();
        assert!(err.to_string().contains("only CycloneDX JSON"));
    }

    #[test]
    fn diagnostic_reports() {
        assert!(emit_diagnostics(&[], DiagFormat::Text).is_empty());
        let e7 = Diagnostic::warning(Code::E7, "no version")
            .with_subject(normalize_name("black").unwrap())
            .with_origin(Origin::new("Pipfile.lock", 12));
        let text = String::from_utf8(emit_diagnostics(std::slice::from_ref(&e7), DiagFormat::Text)).unwrap();
        assert_eq!(text, "E7 warning black no version (Pipfile.lock:12)\n");
        let mixed = [Diagnostic::info(Code::T1, "t"), e7, Diagnostic::info(Code::E2, "e")];
        let text = String::from_utf8(emit_diagnostics(&mixed, DiagFormat::Text)).unwrap();
        let codes: Vec<_> = text.lines().map(|l| l.split(' ').next().unwrap()).collect();
        let mut sorted = codes.clone();
        sorted.sort_by_key(|c| Code::parse(c).unwrap());
        assert_eq!(codes, sorted);
        let json = parse(&emit_diagnostics(&mixed, DiagFormat::Json));
        assert_eq!(json["diagnostics"].as_array().unwrap().len(), 3);
    }
}
