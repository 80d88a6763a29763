use pysbom::version::{
    compare, guess_pin, matches, max_satisfying, parse_specifier_set, parse_version, Operator,
    Version, VersionSpec,
};
use proptest::prelude::*;
use serde_json::Value;

fn oracle() -> Value {
    serde_json::from_str(include_str!("data/specifier_oracle.json")).unwrap()
}

#[test]
fn matches_agrees_with_packaging_table() {
    let data = oracle();
    let cases = data["matches"].as_array().unwrap();
    assert!(cases.len() >= 1000);
    let mut wrong = Vec::new();
    for case in cases {
        let spec = parse_specifier_set(case["spec"].as_str().unwrap()).unwrap();
        let v = parse_version(case["version"].as_str().unwrap()).unwrap();
        if matches(&spec, &v) != case["matches"].as_bool().unwrap() {
            wrong.push(format!("{} / {}", case["spec"], case["version"]));
        }
    }
    assert!(wrong.is_empty(), "{} disagreements: {:?}", wrong.len(), &wrong[..wrong.len().min(20)]);
}

#[test]
fn ordering_agrees_with_packaging_table() {
    let data = oracle();
    for row in data["ordering"].as_array().unwrap() {
        let a = parse_version(row[0].as_str().unwrap()).unwrap();
        let b = parse_version(row[1].as_str().unwrap()).unwrap();
        let expected = row[2].as_i64().unwrap();
        assert_eq!(compare(&a, &b) as i64, expected, "{a} vs {b}");
    }
}

/// `~=X.Y.Z` rewritten as `>=X.Y.Z,==X.Y.*`.
fn expand_compatible(spec: &VersionSpec) -> VersionSpec {
    let text: Vec<String> = spec
        .clauses()
        .iter()
        .map(|c| {
            if c.operator() == Operator::Compatible {
                let v = c.version();
                let prefix: Vec<String> =
                    v.release()[..v.release().len() - 1].iter().map(u64::to_string).collect();
                let epoch = if v.epoch() > 0 { format!("{}!", v.epoch()) } else { String::new() };
                format!(">={v},=={epoch}{}.*", prefix.join("."))
            } else {
                c.to_string()
            }
        })
        .collect();
    parse_specifier_set(&text.join(",")).unwrap()
}

#[test]
fn compatible_expansion_on_table() {
    let data = oracle();
    for case in data["matches"].as_array().unwrap() {
        let spec = parse_specifier_set(case["spec"].as_str().unwrap()).unwrap();
        let v = parse_version(case["version"].as_str().unwrap()).unwrap();
        let expanded = expand_compatible(&spec);
        assert_eq!(spec.contains(&v, true), expanded.contains(&v, true), "{spec} / {v}");
    }
}

fn arb_version() -> impl Strategy<Value = Version> {
    (
        0u64..2,
        prop::collection::vec(0u64..4, 1..4),
        prop::option::of((0usize..3, 0u64..3)),
        prop::option::of(0u64..3),
        prop::option::of(0u64..3),
    )
        .prop_map(|(epoch, release, pre, post, dev)| {
            let mut text = String::new();
            if epoch > 0 {
                text.push_str(&format!("{epoch}!"));
            }
            text.push_str(&release.iter().map(u64::to_string).collect::<Vec<_>>().join("."));
            if let Some((phase, n)) = pre {
                text.push_str(&format!("{}{n}", ["a", "b", "rc"][phase]));
            }
            if let Some(n) = post {
                text.push_str(&format!(".post{n}"));
            }
            if let Some(n) = dev {
                text.push_str(&format!(".dev{n}"));
            }
            parse_version(&text).unwrap()
        })
}

fn arb_spec() -> impl Strategy<Value = VersionSpec> {
    let clause = (0usize..7, arb_version()).prop_map(|(op, v)| {
        let ops = ["==", "!=", "<=", ">=", "<", ">", "~="];
        let v = if ops[op] == "~=" && v.release().len() < 2 {
            let mut r = v.release().to_vec();
            r.push(0);
            Version::new(r).with_epoch(v.epoch())
        } else {
            v
        };
        format!("{}{}", ops[op], v)
    });
    prop::collection::vec(clause, 1..3)
        .prop_map(|c| parse_specifier_set(&c.join(",")).unwrap())
}

proptest! {
    #[test]
    fn compare_is_a_total_order(a in arb_version(), b in arb_version(), c in arb_version()) {
        prop_assert_eq!(compare(&a, &b), compare(&b, &a).reverse());
        if compare(&a, &b).is_le() && compare(&b, &c).is_le() {
            prop_assert!(compare(&a, &c).is_le());
        }
        prop_assert_eq!(compare(&a, &b).is_eq(), a == b);
    }

    #[test]
    fn compatible_expansion_holds(spec in arb_spec(), v in arb_version()) {
        prop_assert_eq!(spec.contains(&v, true), expand_compatible(&spec).contains(&v, true));
    }

    #[test]
    fn display_round_trips(v in arb_version()) {
        let again = parse_version(&v.to_string()).unwrap();
        prop_assert_eq!(again.to_string(), v.to_string());
        prop_assert_eq!(again, v);
    }

    #[test]
    fn max_satisfying_is_maximal(cands in prop::collection::vec(arb_version(), 0..8), spec in arb_spec()) {
        if let Some(best) = max_satisfying(&cands, &spec, false) {
            prop_assert!(cands.contains(&best));
            prop_assert!(spec.contains(&best, true));
            let admitted = |c: &Version| if best.is_prerelease() { spec.contains(c, true) } else { matches(&spec, c) };
            prop_assert!(!cands.iter().any(|c| c > &best && admitted(c)));
        } else {
            prop_assert!(!cands.iter().any(|c| spec.contains(c, true)));
        }
    }

    #[test]
    fn guess_never_pins_exclusive_only(vs in prop::collection::vec((any::<bool>(), arb_version()), 1..4)) {
        let text: Vec<String> = vs.iter().map(|(lt, v)| format!("{}{}", if *lt { "<" } else { ">" }, v)).collect();
        let spec = parse_specifier_set(&text.join(",")).unwrap();
        prop_assert_eq!(guess_pin(&spec), None);
    }
}
