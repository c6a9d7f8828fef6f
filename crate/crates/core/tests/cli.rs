//! Golden-file tests for the `kompet` binary. Regenerate with
//! `UPDATE_GOLDEN=1 cargo test -p kompet --test cli`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn kompet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kompet"))
        .args(args)
        .current_dir(root())
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn kompet")
}

fn check_golden(name: &str, args: &[&str]) {
    let first = kompet(args);
    assert!(
        first.status.success(),
        "{name}: exit {:?}\n{}",
        first.status.code(),
        String::from_utf8_lossy(&first.stderr)
    );
    let second = kompet(args);
    assert_eq!(first.stdout, second.stdout, "{name}: output differs between runs");

    let path = root().join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, &first.stdout).unwrap();
        return;
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        first.stdout == expected,
        "{name}: output differs from {}\n--- got ---\n{}",
        path.display(),
        String::from_utf8_lossy(&first.stdout)
    );
}

macro_rules! golden {
    ($test:ident, $file:expr, [$($arg:expr),* $(,)?]) => {
        #[test]
        fn $test() {
            check_golden($file, &[$($arg),*]);
        }
    };
}

golden!(stats_table, "stats.txt", ["stats", "--corpus", "fixtures/corpus.jsonl"]);
golden!(stats_json, "stats.json", ["stats", "--corpus", "fixtures/corpus.jsonl", "--json"]);
golden!(split_tsv, "split.txt", ["split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "3,1,1", "--seed", "7"]);
golden!(split_json, "split.json", ["split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "2,2,1", "--seed", "11", "--json"]);
golden!(
    supervise_labels,
    "supervise.jsonl",
    ["supervise", "--corpus", "fixtures/corpus.jsonl", "--taxonomy", "fixtures/taxonomy.jsonl", "--language", "da"]
);
golden!(taxonomy_validate, "taxonomy_validate.txt", ["taxonomy", "validate", "--taxonomy", "fixtures/taxonomy.jsonl", "--language", "da"]);
golden!(distribution_table, "distribution.txt", ["distribution", "--labels", "fixtures/gold.jsonl"]);
golden!(distribution_json, "distribution.json", ["distribution", "--labels", "fixtures/silver.jsonl", "--json"]);
golden!(audit_table, "audit.txt", ["audit", "--silver", "fixtures/silver.jsonl", "--gold", "fixtures/gold.jsonl"]);
golden!(
    evaluate_predictions,
    "evaluate_pred.txt",
    ["evaluate", "--gold", "fixtures/gold.jsonl", "--pred", "fixtures/predictions.tsv", "--confusion", "none"]
);
golden!(
    evaluate_matcher_baseline,
    "evaluate_matcher.json",
    [
        "evaluate", "--gold", "fixtures/gold.jsonl", "--baseline", "matcher", "--corpus", "fixtures/corpus.jsonl",
        "--taxonomy", "fixtures/taxonomy.jsonl", "--confusion", "row", "--json"
    ]
);
golden!(
    evaluate_majority_baseline,
    "evaluate_majority.txt",
    ["evaluate", "--gold", "fixtures/gold.jsonl", "--baseline", "majority", "--train", "fixtures/silver.jsonl"]
);
golden!(compare_tsv, "compare.tsv", ["compare", "--runs", "fixtures/runs.json", "--seed", "3", "--bootstrap", "200", "--grid", "200"]);
golden!(
    compare_json,
    "compare.json",
    ["compare", "--runs", "fixtures/runs.json", "--seed", "3", "--bootstrap", "200", "--grid", "200", "--json"]
);
golden!(
    agreement_table,
    "agreement.txt",
    [
        "agreement", "--view", "fixtures/annotator_a.jsonl", "--view", "fixtures/annotator_b.jsonl", "--view",
        "fixtures/annotator_c.jsonl"
    ]
);
golden!(
    agreement_json,
    "agreement.json",
    ["agreement", "--view", "fixtures/annotator_a.jsonl", "--view", "fixtures/annotator_b.jsonl", "--level", "token", "--json"]
);

#[test]
fn checked_in_silver_matches_supervise() {
    let out = kompet(&["supervise", "--corpus", "fixtures/corpus.jsonl", "--taxonomy", "fixtures/taxonomy.jsonl"]);
    assert!(out.status.success());
    assert_eq!(out.stdout, fs::read(root().join("fixtures/silver.jsonl")).unwrap());
}

#[test]
fn supervise_writes_out_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.jsonl");
    let diag = dir.path().join("diag.jsonl");
    let out = kompet(&[
        "supervise",
        "--corpus",
        "fixtures/corpus.jsonl",
        "--taxonomy",
        "fixtures/taxonomy.jsonl",
        "--out",
        labels.to_str().unwrap(),
        "--diagnostics",
        diag.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read(&labels).unwrap(), fs::read(root().join("fixtures/silver.jsonl")).unwrap());
    let diag = fs::read_to_string(&diag).unwrap();
    assert_eq!(diag.lines().count(), 34);
    let hygiene = diag.lines().find(|l| l.contains("\"dk-003-4\"")).unwrap();
    assert_eq!(hygiene, r#"{"span_id":"dk-003-4","candidates":0,"best_distance":null,"error":null}"#);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 missing (K99)"));
}

#[test]
fn seed_changes_split() {
    let a = kompet(&["split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "3,1,1", "--seed", "1"]);
    let outputs: Vec<Vec<u8>> = (2..12)
        .map(|s| kompet(&["split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "3,1,1", "--seed", &s.to_string()]).stdout)
        .collect();
    assert!(outputs.iter().any(|o| *o != a.stdout));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("kompet.toml");
    fs::write(&config, "seed = 7\ntaxonomy = \"fixtures/taxonomy.jsonl\"\nlanguage = \"da\"\n").unwrap();
    let config = config.to_str().unwrap();

    let via_config = kompet(&["--config", config, "split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "3,1,1"]);
    let via_flag = kompet(&["split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "3,1,1", "--seed", "7"]);
    assert_eq!(via_config.stdout, via_flag.stdout);

    let overridden = kompet(&["--config", config, "split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "3,1,1", "--seed", "9"]);
    let direct = kompet(&["split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "3,1,1", "--seed", "9"]);
    assert_eq!(overridden.stdout, direct.stdout);

    let supervised = kompet(&["--config", config, "supervise", "--corpus", "fixtures/corpus.jsonl"]);
    assert!(supervised.status.success());
    assert_eq!(supervised.stdout, fs::read(root().join("fixtures/silver.jsonl")).unwrap());
}

#[test]
fn missing_file_exits_2_and_names_it() {
    let out = kompet(&["stats", "--corpus", "fixtures/nope.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("fixtures/nope.jsonl"), "{err}");
}

#[test]
fn malformed_input_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    let good = fs::read_to_string(root().join("fixtures/corpus.jsonl")).unwrap();
    let first = good.lines().next().unwrap();
    fs::write(&bad, format!("{first}\n{{\"id\": \"x\", \"lang\": \"da\", \"sentences\": [{{\"tokens\": [\"a\"]}}], \"spans\": [{{\"sid\": 0, \"start\": 0, \"end\": 3, \"kind\": \"SKILL\"}}]}}\n")).unwrap();
    let out = kompet(&["stats", "--corpus", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("out of sentence bounds"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(kompet(&[]).status.code(), Some(1));
    assert_eq!(kompet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(kompet(&["split", "--corpus", "fixtures/corpus.jsonl", "--sizes", "1,2"]).status.code(), Some(1));
    assert_eq!(kompet(&["evaluate", "--gold", "fixtures/gold.jsonl"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_0() {
    let help = kompet(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8_lossy(&help.stdout);
    for sub in ["taxonomy", "stats", "split", "supervise", "distribution", "evaluate", "compare", "agreement", "serve"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
    let version = kompet(&["--version"]);
    assert_eq!(version.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&version.stdout).starts_with("kompet "));
}

#[test]
fn invalid_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs.json");
    fs::write(&runs, r#"[{"model": "a", "scores": [0.1]}, {"model": "b", "scores": [0.2, 0.3]}]"#).unwrap();
    let out = kompet(&["compare", "--runs", runs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let too_few = kompet(&["compare", "--runs", "fixtures/runs.json", "--bootstrap", "10"]);
    assert_eq!(too_few.status.code(), Some(2));
}

#[test]
fn unreachable_online_service_exits_3() {
    let out = Command::new(env!("CARGO_BIN_EXE_kompet"))
        .args(["taxonomy", "fetch", "--query", "python", "--language", "da", "--timeout", "2"])
        .env("KOMPET_ESCO_BASE_URL", "http://127.0.0.1:9")
        .current_dir(root())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn golden_directory_has_no_strays() {
    // every golden file is produced by a test above
    let dir = root().join("tests/golden");
    let names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    let source = fs::read_to_string(Path::new(&root()).join("tests/cli.rs")).unwrap();
    for name in names {
        assert!(source.contains(&format!("\"{name}\"")), "stray golden file {name}");
    }
}
