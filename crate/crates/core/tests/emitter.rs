mod common;

use std::collections::BTreeSet;

use pysbom::corpus::FIXTURE_PAIRS;
use pysbom::cyclonedx::{emit, BomMetadata};
use pysbom::{normalize_name, Reach, Resolution, ResolvedComponent, Scope, SourceRef, VcsType};
use serde_json::Value;

#[test]
fn empty_document_validates() {
    let validator = common::cdx_validator();
    let doc: Value = serde_json::from_slice(&emit(&[], &BTreeSet::new(), &[], &BomMetadata::new("empty"), true).unwrap()).unwrap();
    assert_eq!(common::schema_errors(&validator, &doc), Vec::<String>::new());
}

#[test]
fn every_source_kind_validates() {
    let mk = |name: &str, version: Option<&str>, source: SourceRef| {
        let mut c = ResolvedComponent::new(
            normalize_name(name).unwrap(),
            version.map(|v| v.parse().unwrap()),
            source,
            Scope::Optional,
            Reach::Direct,
            Resolution::Resolved { at: common::as_of(), as_of: true },
        );
        c.hashes.push(pysbom::FileHash::parse(&format!("sha256:{}", "ab".repeat(32))).unwrap());
        c
    };
    let cs = vec![
        mk("a", Some("1.0"), SourceRef::registry()),
        mk("b", None, SourceRef::vcs(VcsType::Git, "https://example.com/b", Some("deadbeef".into()))),
        mk("c", Some("2.0"), SourceRef::direct_url("https://example.com/c-2.0.tar.gz")),
        mk("d", None, SourceRef::path("./vendor/d")),
        mk("e", Some("1.0"), SourceRef::registry_at("https://mirror.example/simple")),
    ];
    let edges: BTreeSet<_> = [(cs[0].name.clone(), cs[1].name.clone())].into();
    let doc: Value = serde_json::from_slice(&emit(&cs, &edges, &[], &BomMetadata::new("kinds"), false).unwrap()).unwrap();
    assert_eq!(common::schema_errors(&common::cdx_validator(), &doc), Vec::<String>::new());
}

#[test]
fn poetry_fixture_component_set_matches_lock_oracle() {
    let fixture = pysbom::corpus::load_fixture(&common::corpus_dir().join("poetry-poetry")).unwrap();
    let generated = common::generate_fixture("poetry-poetry");
    let names: BTreeSet<_> = generated.resolved.components.iter().map(|c| c.name.clone()).collect();
    let mut want: BTreeSet<_> = fixture.expected.direct.iter().map(|d| d.name.clone()).collect();
    want.extend(fixture.expected.transitive.iter().cloned());
    assert_eq!(names, want);
}

#[test]
fn corpus_sboms_validate_and_close_over_refs() {
    let validator = common::cdx_validator();
    for (fe, be) in FIXTURE_PAIRS {
        let id = format!("{fe}-{be}");
        let generated = common::generate_fixture(&id);
        let doc: Value = serde_json::from_slice(&generated.sbom).unwrap();
        assert_eq!(common::schema_errors(&validator, &doc), Vec::<String>::new(), "{id}");

        let refs: BTreeSet<&str> = doc["components"].as_array().unwrap().iter().map(|c| c["bom-ref"].as_str().unwrap()).collect();
        assert_eq!(refs.len(), doc["components"].as_array().unwrap().len(), "{id}: duplicate bom-ref");
        let root = doc["metadata"]["component"]["bom-ref"].as_str().unwrap();
        for dep in doc["dependencies"].as_array().unwrap() {
            let r = dep["ref"].as_str().unwrap();
            assert!(r == root || refs.contains(r), "{id}: {r}");
            for child in dep["dependsOn"].as_array().unwrap() {
                assert!(refs.contains(child.as_str().unwrap()), "{id}: {child}");
            }
        }
    }
}

#[test]
fn validator_rejects_bad_documents() {
    let validator = common::cdx_validator();
    let mut doc: Value = serde_json::from_slice(&emit(&[], &BTreeSet::new(), &[], &BomMetadata::new("x"), true).unwrap()).unwrap();
    doc["components"] = serde_json::json!([{ "type": "library", "name": "a", "scope": "sometimes" }]);
    assert!(!common::schema_errors(&validator, &doc).is_empty());
}

mod order {
    use super::*;
    use proptest::prelude::*;

    fn generated() -> &'static pysbom::pipeline::Generated {
        static G: std::sync::OnceLock<pysbom::pipeline::Generated> = std::sync::OnceLock::new();
        G.get_or_init(|| common::generate_fixture("poetry-poetry"))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn deterministic_output_ignores_input_order(
            order in Just((0..generated().resolved.components.len()).collect::<Vec<_>>()).prop_shuffle(),
            diag_order in Just((0..generated().diagnostics.len()).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let g = generated();
            let cs: Vec<_> = order.iter().map(|&i| g.resolved.components[i].clone()).collect();
            let ds: Vec<_> = diag_order.iter().map(|&i| g.diagnostics[i].clone()).collect();
            let root = g.model.root.canonicalize().unwrap();
            let meta = BomMetadata::new(root.file_name().unwrap().to_string_lossy());
            let bytes = emit(&cs, &g.resolved.edges, &ds, &meta, true).unwrap();
            prop_assert_eq!(bytes, g.sbom.clone());
        }
    }
}
