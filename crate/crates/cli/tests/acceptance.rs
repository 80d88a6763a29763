//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pysbom::corpus::{diff_sbom, load_corpus, load_fixture, sbom_components, sbom_edges, score_matrix, Expectation, TriState};
use pysbom::version::{guess_pin, matches, parse_specifier_set, parse_version};
use serde_json::Value;

/// Criterion 1 runtime budget for scoring the whole corpus.
const CORPUS_BUDGET: Duration = Duration::from_secs(30);
/// Criterion 5 minimum number of oracle pairs.
const MIN_ORACLE_PAIRS: usize = 1000;
/// Zero tolerance for criteria 4, 5 and 9.
const ALLOWED_DISAGREEMENTS: usize = 0;

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pysbom")
}

fn scan(root: &Path, output: &Path, cache: &Path, as_of: &str) -> std::process::Output {
    Command::new(bin())
        .env_remove("PYSBOM_INDEX_URL")
        .env_remove("PYSBOM_CACHE_DIR")
        .arg("scan")
        .arg(root)
        .arg("-o")
        .arg(output)
        .args(["--offline", "--cache-dir"])
        .arg(cache)
        .args(["--as-of", as_of, "--python-version", common::SCORING_PYTHON])
        .args(["--include-optional", "--include-dev", "--diagnostics", "none"])
        .output()
        .expect("run pysbom")
}

fn fixture_ids() -> Vec<String> {
    pysbom::corpus::FIXTURE_PAIRS.iter().map(|(fe, be)| format!("{fe}-{be}")).collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn corpus_dominance() -> Outcome {
    let start = Instant::now();
    let fixtures = load_corpus(&common::corpus_dir()).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for f in &fixtures {
        let g = common::generate_fixture(&f.id());
        let doc: Value = serde_json::from_slice(&g.sbom).unwrap();
        rows.push((f.id(), diff_sbom(&doc, &f.expected)));
    }
    let elapsed = start.elapsed();
    let matrix = score_matrix(rows);
    let mut failures = Vec::new();
    for ((id, row), f) in matrix.rows.iter().zip(&fixtures) {
        if row.finds_direct != TriState::Yes {
            failures.push(format!("{id}: direct {}", row.finds_direct));
        }
        if !f.expected.optional.is_empty() && row.finds_optional != TriState::Yes {
            failures.push(format!("{id}: optional {}", row.finds_optional));
        }
        if !f.expected.remote.is_empty() && row.finds_remote != TriState::Yes {
            failures.push(format!("{id}: remote {}", row.finds_remote));
        }
        if f.expected.lockfile.is_some() && row.finds_transitive != TriState::Yes {
            failures.push(format!("{id}: transitive {}", row.finds_transitive));
        }
    }
    if elapsed >= CORPUS_BUDGET {
        failures.push(format!("took {elapsed:?}, budget {CORPUS_BUDGET:?}"));
    }
    print!("{}", matrix.to_text());
    if failures.is_empty() {
        Ok(format!("{} fixtures scored in {:.2?}", fixtures.len(), elapsed))
    } else {
        Err(failures.join("; "))
    }
}

fn pipenv_develop() -> Outcome {
    let f = load_fixture(&common::corpus_dir().join("pipenv-pdm")).map_err(|e| e.to_string())?;
    let g = common::generate_fixture("pipenv-pdm");
    let doc: Value = serde_json::from_slice(&g.sbom).unwrap();
    let names: BTreeSet<_> = sbom_components(&doc).into_iter().map(|c| c.name).collect();
    let found: BTreeSet<_> = f.expected.develop.intersection(&names).cloned().collect();
    if f.expected.develop.is_empty() {
        return Err("oracle develop set is empty".into());
    }
    if found != f.expected.develop {
        let missing: Vec<_> = f.expected.develop.difference(&found).map(|n| n.to_string()).collect();
        return Err(format!("missing develop packages: {}", missing.join(", ")));
    }
    Ok(format!("{} develop packages present", found.len()))
}

fn vcs_dependency() -> Outcome {
    let mut failures = Vec::new();
    for id in fixture_ids() {
        let f = load_fixture(&common::corpus_dir().join(&id)).map_err(|e| e.to_string())?;
        let want = f.expected.direct.iter().find_map(|d| match &d.expect {
            Expectation::Ref(r) if d.name.as_str() == "black" => Some(r.clone()),
            _ => None,
        });
        let g = common::generate_fixture(&id);
        let doc: Value = serde_json::from_slice(&g.sbom).unwrap();
        let Some(black) = sbom_components(&doc).into_iter().find(|c| c.name.as_str() == "black") else {
            failures.push(format!("{id}: black absent"));
            continue;
        };
        if !black.purl.contains("vcs_url=git%2B") {
            failures.push(format!("{id}: purl without vcs_url: {}", black.purl));
        }
        if black.vcs_ref() != want {
            failures.push(format!("{id}: ref {:?}, expected {want:?}", black.vcs_ref()));
        }
        if id == "pipenv-pdm" {
            let resolution = black.property("resolution").unwrap_or("");
            let ok = resolution == "unknown" || (resolution == "locked" && black.vcs_ref().is_some());
            if !ok {
                failures.push(format!("{id}: resolution {resolution}"));
            }
            let e7 = g.diagnostics.iter().any(|d| d.code == pysbom::Code::E7 && d.subject.as_ref().is_some_and(|s| s.as_str() == "black"));
            if !e7 {
                failures.push(format!("{id}: no E7 diagnostic for black"));
            }
        }
    }
    if failures.is_empty() {
        Ok("black carries vcs_url and ref in all 12 SBOMs; E7 on Pipenv".into())
    } else {
        Err(failures.join("; "))
    }
}

/// Constraint → expected guess, following the keep-clauses-with-`=`,
/// read-as-`==`, `.*`→`.0` transformation.
const GUESS_TABLE: [(&str, Option<&str>); 20] = [
    (">=1.2.3", Some("1.2.3")),
    (">=3.5,<4.0", Some("3.5")),
    ("==1.1.*", Some("1.1.0")),
    ("==2.*", Some("2.0")),
    ("==3.1.4.*", Some("3.1.4.0")),
    ("<2.0", None),
    (">1.0", None),
    (">1.0,<2.0", None),
    ("<=1.4", Some("1.4")),
    ("~=1.4.2", Some("1.4.2")),
    ("~=2.2", Some("2.2")),
    ("==0.6.2", Some("0.6.2")),
    ("!=1.5", Some("1.5")),
    (">=1.0,<=1.0.0", Some("1.0")),
    ("", None),
    (">=2!1.0", Some("2!1.0")),
    (">=1.0rc1", Some("1.0rc1")),
    ("==1.0.post1", Some("1.0.post1")),
    (">=1.0,==2.0", None),
    (">0.9,>=1.1", Some("1.1")),
];

fn guessing_fidelity() -> Outcome {
    let mut wrong = Vec::new();
    for (spec, want) in GUESS_TABLE {
        let got = guess_pin(&parse_specifier_set(spec).map_err(|e| e.to_string())?).map(|v| v.to_string());
        if got.as_deref() != want {
            wrong.push(format!("{spec:?}: got {got:?}, want {want:?}"));
        }
    }
    if wrong.len() > ALLOWED_DISAGREEMENTS {
        Err(wrong.join("; "))
    } else {
        Ok(format!("{}/{} cases exact", GUESS_TABLE.len(), GUESS_TABLE.len()))
    }
}

fn specifier_oracle() -> Outcome {
    let path = common::core_dir().join("tests/data/specifier_oracle.json");
    let data = read_json(&path);
    let cases = data["matches"].as_array().ok_or("oracle has no matches table")?;
    let mut wrong = 0;
    for case in cases {
        let spec = parse_specifier_set(case["spec"].as_str().unwrap()).map_err(|e| e.to_string())?;
        let v = parse_version(case["version"].as_str().unwrap()).map_err(|e| e.to_string())?;
        if matches(&spec, &v) != case["matches"].as_bool().unwrap() {
            wrong += 1;
        }
    }
    if cases.len() < MIN_ORACLE_PAIRS {
        Err(format!("only {} pairs", cases.len()))
    } else if wrong > ALLOWED_DISAGREEMENTS {
        Err(format!("{wrong} disagreements over {} pairs", cases.len()))
    } else {
        Ok(format!("{} pairs, 0 disagreements", cases.len()))
    }
}

fn as_of_monotonicity() -> Outcome {
    let cache = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/two-release-index");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let project = tmp.path().join("project");
    std::fs::create_dir(&project).unwrap();
    std::fs::write(project.join("requirements.txt"), "urllib3\n").unwrap();
    // uploads: 2.2.0 at 2024-01-30T15:18:04Z, 2.2.1 at 2024-02-18T03:55:54.704486Z
    let cases = [
        ("2024-02-01T00:00:00Z", "2.2.0"),
        ("2024-02-18T03:55:54.704485Z", "2.2.0"),
        ("2024-02-18T03:55:54.704486Z", "2.2.1"),
        ("2025-01-01T00:00:00Z", "2.2.1"),
    ];
    let mut failures = Vec::new();
    for (i, (t, want)) in cases.iter().enumerate() {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("sbom-{i}-{run}.json"));
            let status = scan(&project, &out, &cache, t);
            if !status.status.success() {
                failures.push(format!("as_of {t}: exit {:?}", status.status.code()));
                continue;
            }
            outputs.push(std::fs::read(&out).unwrap());
        }
        if outputs.len() == 2 && outputs[0] != outputs[1] {
            failures.push(format!("as_of {t}: runs differ"));
        }
        if let Some(bytes) = outputs.first() {
            let doc: Value = serde_json::from_slice(bytes).unwrap();
            let got = sbom_components(&doc).into_iter().find(|c| c.name.as_str() == "urllib3").and_then(|c| c.version);
            if got.as_deref() != Some(*want) {
                failures.push(format!("as_of {t}: got {got:?}, want {want}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{} timestamps, earlier before t2 and later from t2 on", cases.len()))
    } else {
        Err(failures.join("; "))
    }
}

fn corpus_cli_runs(tmp: &Path) -> Vec<(String, [PathBuf; 2])> {
    let cache = common::corpus_dir().join("index-cache");
    fixture_ids()
        .into_iter()
        .map(|id| {
            let outs = [0, 1].map(|run| {
                let out = tmp.join(format!("{id}-{run}.cdx.json"));
                let result = scan(&common::corpus_dir().join(&id), &out, &cache, common::SCORING_AS_OF);
                assert!(result.status.success(), "{id}: {}", String::from_utf8_lossy(&result.stderr));
                out
            });
            (id, outs)
        })
        .collect()
}

fn determinism(runs: &[(String, [PathBuf; 2])]) -> Outcome {
    let mut differing = Vec::new();
    for (id, [a, b]) in runs {
        let diag = |p: &Path| {
            let mut s = p.as_os_str().to_owned();
            s.push(".diag.json");
            std::fs::read(PathBuf::from(s)).unwrap()
        };
        if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
            differing.push(format!("{id} sbom"));
        }
        if diag(a) != diag(b) {
            differing.push(format!("{id} diagnostics"));
        }
    }
    if differing.is_empty() {
        Ok(format!("{} fixtures, SBOM and diagnostics byte-identical", runs.len()))
    } else {
        Err(differing.join(", "))
    }
}

fn schema_validity(runs: &[(String, [PathBuf; 2])]) -> Outcome {
    let validator = common::cdx_validator();
    let mut failures = Vec::new();
    for (id, [a, _]) in runs {
        let errors = common::schema_errors(&validator, &read_json(a));
        if !errors.is_empty() {
            failures.push(format!("{id}: {}", errors.join(" | ")));
        }
    }
    if failures.is_empty() {
        Ok(format!("{} SBOMs valid against CycloneDX 1.5", runs.len()))
    } else {
        Err(failures.join("; "))
    }
}

fn transitive_closure(runs: &[(String, [PathBuf; 2])]) -> Outcome {
    let mut checked = Vec::new();
    let mut failures = Vec::new();
    for (id, [a, _]) in runs {
        let f = load_fixture(&common::corpus_dir().join(id)).map_err(|e| e.to_string())?;
        if f.expected.lockfile.is_none() {
            continue;
        }
        let edges = sbom_edges(&read_json(a));
        let extra = edges.difference(&f.expected.lock_edges).count();
        let missing = f.expected.lock_edges.difference(&edges).count();
        if extra + missing > ALLOWED_DISAGREEMENTS {
            failures.push(format!("{id}: {missing} missing, {extra} extra edges"));
        }
        checked.push(format!("{id}={}", edges.len()));
    }
    if failures.is_empty() {
        Ok(format!("edge sets equal on {} lockfile fixtures ({})", checked.len(), checked.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let runs = corpus_cli_runs(tmp.path());
    let criteria: Vec<(&str, Check)> = vec![
        ("corpus dominance", Box::new(corpus_dominance)),
        ("Pipenv develop group kept", Box::new(pipenv_develop)),
        ("VCS dependency never absent", Box::new(vcs_dependency)),
        ("guessing fidelity", Box::new(guessing_fidelity)),
        ("specifier oracle equivalence", Box::new(specifier_oracle)),
        ("as-of monotonicity", Box::new(as_of_monotonicity)),
        ("determinism", Box::new(|| determinism(&runs))),
        ("schema validity", Box::new(|| schema_validity(&runs))),
        ("transitive closure oracle", Box::new(|| transitive_closure(&runs))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {reason}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
