#![allow(dead_code)]

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use jsonschema::{Resource, Validator};
use pysbom::parsers::ParseOptions;
use pysbom::pipeline::{generate, Generated};
use pysbom::resolver::{parse_strategy_order, DiskCache, HttpIndex, ResolutionPolicy, DEFAULT_INDEX_URL};
use serde_json::Value;

pub const SCORING_AS_OF: &str = "2024-03-01T00:00:00Z";
pub const SCORING_PYTHON: &str = "3.11";

pub fn core_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core")
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn as_of() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(SCORING_AS_OF).unwrap().with_timezone(&Utc)
}

/// Everything included, offline, pinned to the recorded index snapshot.
pub fn scoring_policy() -> ResolutionPolicy {
    let mut p = ResolutionPolicy::new(parse_strategy_order("lock,resolve").unwrap(), SCORING_PYTHON).unwrap();
    p.as_of = Some(as_of());
    p.include_optional = true;
    p.include_dev = true;
    p.offline = true;
    p
}

pub fn corpus_index() -> HttpIndex {
    HttpIndex::new(DEFAULT_INDEX_URL, Some(DiskCache::new(corpus_dir().join("index-cache"))), true)
}

pub fn generate_fixture(id: &str) -> Generated {
    generate(&corpus_dir().join(id), &ParseOptions::default(), &scoring_policy(), &corpus_index(), true)
        .unwrap_or_else(|e| panic!("{id}: {e}"))
}

pub fn cdx_validator() -> Validator {
    let dir = core_dir().join("tests/schema");
    let load = |name: &str| -> Value {
        serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
    };
    let bom = load("bom-1.5.schema.json");
    jsonschema::options()
        .should_validate_formats(true)
        .with_resource(
            "http://cyclonedx.org/schema/spdx.schema.json",
            Resource::from_contents(load("spdx.schema.json")).unwrap(),
        )
        .with_resource(
            "http://cyclonedx.org/schema/jsf-0.82.schema.json",
            Resource::from_contents(load("jsf-0.82.schema.json")).unwrap(),
        )
        .build(&bom)
        .unwrap()
}

pub fn schema_errors(validator: &Validator, doc: &Value) -> Vec<String> {
    validator
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect()
}
