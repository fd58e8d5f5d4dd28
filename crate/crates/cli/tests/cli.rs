//! Runs the binary against golden files in `tests/golden`; set
//! `UPDATE_GOLDEN=1` to rewrite them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn arbcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arbcert"))
        .args(args)
        .current_dir(golden(""))
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = arbcert(args);
    assert!(
        out.status.success(),
        "{args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn matches_golden(name: &str, args: &[&str]) {
    let got = stdout(args);
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, &got).unwrap();
        return;
    }
    let want = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    if name.ends_with(".json") {
        let (g, w): (Value, Value) = (
            serde_json::from_str(&got).unwrap(),
            serde_json::from_str(&want).unwrap(),
        );
        assert_eq!(g, w, "{name} differs");
    }
    assert_eq!(got, want, "{name} differs byte-wise");
}

#[test]
fn examples_are_written_bit_exactly() {
    matches_golden("ex41.json", &["examples", "ex41"]);
    matches_golden("ex42.json", &["examples", "ex42"]);
    matches_golden("ex43_n1.json", &["examples", "ex43", "--n-max", "1"]);
}

#[test]
fn smallest_cascade_truncation_has_four_leaves() {
    let m: Value = serde_json::from_str(&stdout(&["examples", "ex43", "--n-max", "1"])).unwrap();
    assert_eq!(m["assets"], 4);
    let nodes = m["nodes"].as_array().unwrap();
    assert_eq!(nodes.iter().map(|n| n["t"].as_u64().unwrap()).max(), Some(3));
    assert_eq!(nodes.iter().filter(|n| n["t"] == 3).count(), 4);
    assert_eq!(m["leaf_prob"].as_object().unwrap().len(), 4);
}

#[test]
fn check_reports_match_golden() {
    matches_golden("ex41.check.json", &["check", "ex41.json"]);
    matches_golden("ex42.check.json", &["check", "ex42.json"]);
    matches_golden(
        "ex42.naps_nawps.txt",
        &["check", "ex42.json", "--conditions", "naps,nawps", "--text"],
    );
}

#[test]
fn ex41_vector() {
    let r: Value = serde_json::from_str(&stdout(&["check", "ex41.json"])).unwrap();
    let got: Vec<bool> = ["na", "nas", "naps", "nar", "nawps", "ef", "penner", "nullspace"]
        .iter()
        .map(|c| r[c]["holds"].as_bool().unwrap())
        .collect();
    assert_eq!(got, [true, true, true, false, true, false, false, false]);
    assert!(r["consistency"].as_object().unwrap().values().all(|v| v == true));
}

#[test]
fn ex42_selected_conditions() {
    let r: Value = serde_json::from_str(&stdout(&["check", "ex42.json", "--conditions", "naps,nawps"])).unwrap();
    assert_eq!(r["naps"]["holds"], false);
    assert_eq!(r["nawps"]["holds"], true);
    assert!(r.get("na").is_none());
}

#[test]
fn mixed_condition_with_a_witness_file() {
    let r: Value = serde_json::from_str(&stdout(&[
        "check",
        "ex42.json",
        "--witness",
        "ex42_witness.json",
        "--conditions",
        "mixed,naps",
    ]))
    .unwrap();
    // the frictionless comparison market absorbs the failing position
    assert_eq!(r["mixed"]["holds"], true);
    assert_eq!(r["naps"]["holds"], false);
}

#[test]
fn timings_only_on_request() {
    let plain: Value = serde_json::from_str(&stdout(&["check", "ex41.json", "--conditions", "na"])).unwrap();
    assert!(plain["na"].get("ms").is_none());
    let timed: Value =
        serde_json::from_str(&stdout(&["check", "ex41.json", "--conditions", "na", "--timings"])).unwrap();
    assert!(timed["na"]["ms"].is_u64());
}

#[test]
fn output_is_deterministic() {
    let a = stdout(&["check", "ex42.json"]);
    let b = stdout(&["check", "ex42.json"]);
    assert_eq!(a, b);
}

#[test]
fn input_errors_exit_with_two() {
    for args in [
        vec!["check", "missing.json"],
        vec!["check", "ex41.json", "--conditions", "bogus"],
        vec!["check", "ex41.json", "--witness", "ex42.json", "--conditions", "mixed"],
        vec!["validate", "float.json"],
        vec!["decompose", "ex41.json", "--node", "1", "--order", "[[1,2,1]]"],
        vec!["decompose", "ex41.json", "--node", "0", "--order", "[[1,1,1]]"],
        vec!["superhedge", "ex41.json", "--claim", "[0,1]", "--numeraire", "3"],
        vec!["check", "ex41.json", "--bogus-flag"],
    ] {
        let out = arbcert(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn validate_accepts_examples() {
    assert!(stdout(&["validate", "ex43_n1.json"]).starts_with("ok"));
}

#[test]
fn decompositions() {
    matches_golden(
        "ex41.decompose_buy.json",
        &["decompose", "ex41.json", "--node", "0", "--order", "[[1,2,1]]"],
    );
    let sell: Value = serde_json::from_str(&stdout(&[
        "decompose",
        "ex41.json",
        "--node",
        "0",
        "--order",
        "[[2,1,1]]",
    ]))
    .unwrap();
    assert_eq!(sell["pure"], serde_json::json!([[2, 1, 1]]));
    assert_eq!(sell["reversible"], serde_json::json!([]));
    let empty: Value =
        serde_json::from_str(&stdout(&["decompose", "ex41.json", "--node", "0", "--order", "[]"])).unwrap();
    assert_eq!(empty["reversible"], serde_json::json!([]));
    assert_eq!(empty["pure"], serde_json::json!([]));
}

#[test]
fn prices() {
    matches_golden("ex41.cps.json", &["cps", "ex41.json", "--bounds", "0:2"]);
    matches_golden("ex41.cps_strict.json", &["cps", "ex41.json", "--strict"]);
    matches_golden("ex42.superhedge.json", &["superhedge", "ex42.json", "--claim", "[0,1]"]);
}

#[test]
fn lp_dump() {
    let dir = std::env::temp_dir().join(format!("arbcert-dump-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let file = dir.join("lp.txt");
    stdout(&["cps", "ex41.json", "--dump-lp", file.to_str().unwrap()]);
    let text = fs::read_to_string(&file).unwrap();
    assert!(text.starts_with("# consistent prices\n"));
    assert!(text.lines().any(|l| l.starts_with("max:") || l.starts_with("min:")));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn suite_runner_is_seeded() {
    let args = ["suite", "--seed", "3", "--models", "5", "--decompositions", "3"];
    assert_eq!(stdout(&args), stdout(&args));
}
