use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use apichain_cli::{digest_bytes, RunManifest, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

fn apichain<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apichain"))
        .args(args)
        .env_remove("APICHAIN_API_KEY")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(p: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn replay_args(cmd: &str, fixtures: &Path, out: &Path, input: &Path) -> Vec<String> {
    [cmd, "--backend", "replay", "--fixtures", s(fixtures), "-o", s(out), s(input)].map(String::from).to_vec()
}

#[test]
fn parse_three_texts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("parsed.jsonl");
    let o = apichain(&replay_args("parse", &data("strings/fixtures"), &out, &data("strings/corpus.jsonl")));
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let rows = lines(&out);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["pairs"].as_array().unwrap().len(), 3);
    assert_eq!(rows[1]["fqns"], serde_json::json!(["java.util.ArrayList", "java.util.LinkedList"]));

    let manifest = RunManifest::load(&out).unwrap();
    let input = std::fs::read(data("strings/corpus.jsonl")).unwrap();
    assert_eq!(manifest.input_digest, digest_bytes(&input));
    assert_eq!(manifest.totals.texts, 3);
    assert_eq!(manifest.totals.pairs, 4);
    assert_eq!(manifest.backend_id, "replay");
}

#[test]
fn unreadable_input_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out.jsonl");
    let o = apichain(&replay_args("parse", &data("strings/fixtures"), &out, &tmp.path().join("missing.txt")));
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.txt"));
    assert!(!out.exists());
}

#[test]
fn missing_fixture_isolates_the_text() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.jsonl");
    let corpus = std::fs::read_to_string(data("strings/corpus.jsonl")).unwrap();
    std::fs::write(&input, format!("{corpus}{{\"id\":\"new\",\"text\":\"Unrecorded java.util.Optional text.\"}}\n")).unwrap();
    let out = tmp.path().join("out.jsonl");
    let o = apichain(&replay_args("parse", &data("strings/fixtures"), &out, &input));
    assert_eq!(o.status.code(), Some(EXIT_PARTIAL));
    let rows = lines(&out);
    assert_eq!(rows.len(), 4);
    assert!(rows[3]["error"].as_str().unwrap().contains("no fixture"));
    assert!(rows[..3].iter().all(|r| r.get("error").is_none()));
    assert_eq!(RunManifest::load(&out).unwrap().totals.errors, 1);
}

#[test]
fn relation_subset_filters_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fs.jsonl");
    let mut args = replay_args("infer", &data("strings/fixtures"), &out, &data("strings/corpus.jsonl"));
    args.extend(["--relations", "function-similarity"].map(String::from));
    let o = apichain(&args);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    for row in lines(&out) {
        for t in row["triples"].as_array().unwrap() {
            assert_eq!(t["relation"], "function-similarity");
        }
    }
}

#[test]
fn ablation_disagrees_with_full_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let mut holding = Vec::new();
    for variant in ["full", "ard3"] {
        let out = tmp.path().join(format!("{variant}.jsonl"));
        let mut args = replay_args("infer", &data("strings/fixtures"), &out, &data("strings/corpus.jsonl"));
        args.extend(["--variant", variant].map(String::from));
        assert_eq!(apichain(&args).status.code(), Some(EXIT_OK));
        let set: Vec<String> = lines(&out)
            .iter()
            .flat_map(|r| r["triples"].as_array().unwrap().clone())
            .filter(|t| t["holds"] == true)
            .map(|t| format!("{} {}", t["pair"], t["relation"]))
            .collect();
        holding.push(set);
    }
    assert_ne!(holding[0], holding[1]);
}

#[test]
fn unknown_variant_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x.jsonl");
    let mut args = replay_args("infer", &data("strings/fixtures"), &out, &data("strings/corpus.jsonl"));
    args.extend(["--variant", "everything"].map(String::from));
    assert_eq!(apichain(&args).status.code(), Some(EXIT_CONFIG));
}

#[test]
fn eval_prints_rounded_table() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.json");
    let o = apichain(&[
        "eval",
        "--pred",
        s(&data("eval/pred.jsonl")),
        "--gold",
        s(&data("eval/gold.jsonl")),
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let table = String::from_utf8(o.stdout).unwrap();
    let overall = table.lines().find(|l| l.starts_with("overall")).unwrap();
    assert!(overall.ends_with("0.67    0.67  0.67"), "{table}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["overall"]["tp"], 2);
    assert!(json["per_relation"]["efficiency-comparison"].is_object());
    assert!(RunManifest::load(&report).is_ok());
}

#[test]
fn eval_perfect_prediction() {
    let o = apichain(&["eval", "--pred", s(&data("strings/gold_predictions.jsonl")), "--gold", s(&data("strings/gold.jsonl"))]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("overall") && l.ends_with("1.00    1.00  1.00")), "{table}");
}

#[test]
fn malformed_gold_names_the_line() {
    let o = apichain(&["eval", "--pred", s(&data("eval/pred.jsonl")), "--gold", s(&data("eval/gold_malformed.jsonl"))]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gold_malformed.jsonl:2"));
}

#[test]
fn fqn_accuracy_from_parse_output() {
    let tmp = tempfile::tempdir().unwrap();
    let parsed = tmp.path().join("parsed.jsonl");
    apichain(&replay_args("parse", &data("strings/fixtures"), &parsed, &data("strings/corpus.jsonl")));
    let o = apichain(&[
        "eval",
        "--pred",
        s(&data("strings/gold_predictions.jsonl")),
        "--gold",
        s(&data("strings/gold.jsonl")),
        "--parsed",
        s(&parsed),
    ]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("accuracy[fqn] 1.00"));
}

#[test]
fn record_without_credentials_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = apichain(&[
        "record",
        "--fixtures",
        s(&tmp.path().join("fx")),
        "-o",
        s(&tmp.path().join("out.jsonl")),
        s(&data("strings/corpus.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&o.stderr).contains("APICHAIN_API_KEY"));
}

#[test]
fn record_then_replay_matches() {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = tmp.path().join("fx");
    let recorded = tmp.path().join("rec.jsonl");
    let cache = tmp.path().join("cache");
    let script = data("strings/mock_script.json");
    let corpus = data("strings/corpus.jsonl");
    // A warm cache must not stop fixtures from being written.
    for _ in 0..2 {
        let o = apichain(&[
            "record", "--backend", "mock", "--mock-script", s(&script), "--cache", s(&cache),
            "--fixtures", s(&fixtures), "-o", s(&recorded), s(&corpus),
        ]);
        assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::remove_dir_all(&fixtures).ok();
    }
    assert_eq!(RunManifest::load(&recorded).unwrap().totals.gateway_calls, 0);
    apichain(&[
        "record", "--backend", "mock", "--mock-script", s(&script), "--cache", s(&cache),
        "--fixtures", s(&fixtures), "-o", s(&recorded), s(&corpus),
    ]);
    let replayed = tmp.path().join("rep.jsonl");
    let o = apichain(&replay_args("infer", &fixtures, &replayed, &corpus));
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&recorded).unwrap(), std::fs::read(&replayed).unwrap());
}

#[test]
fn config_file_supplies_backend() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("apichain.toml");
    std::fs::write(
        &config,
        format!("backend = \"replay\"\nfixtures_dir = {:?}\nvariant = \"ard1\"\n", s(&data("strings/fixtures"))),
    )
    .unwrap();
    let out = tmp.path().join("out.jsonl");
    let o = apichain(&["infer", "--config", s(&config), "-o", s(&out), s(&data("strings/corpus.jsonl"))]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&out)[0]["variant"], "ard1");
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "backend = 3\n").unwrap();
    let o = apichain(&["infer", "--config", s(&bad), "-o", s(&out), s(&data("strings/corpus.jsonl"))]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn cache_and_catalog_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let out = tmp.path().join("out.jsonl");
    let mut args = replay_args("parse", &data("strings/fixtures"), &out, &data("strings/corpus.jsonl"));
    args.extend(["--cache", s(&cache)].map(String::from));
    apichain(&args);
    let o = apichain(&["cache", "stats", "--cache", s(&cache)]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("4 entries"));
    assert_eq!(apichain(&["cache", "clear", "--cache", s(&cache)]).status.code(), Some(EXIT_OK));
    let o = apichain(&["cache", "stats", "--cache", s(&cache)]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("0 entries"));

    let dir = tmp.path().join("prompts");
    assert_eq!(apichain(&["catalog", "export", s(&dir)]).status.code(), Some(EXIT_OK));
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 26);
    let o = apichain(&[
        "parse", "--backend", "replay", "--fixtures", s(&data("strings/fixtures")), "--catalog", s(&dir),
        "-o", s(&out), s(&data("strings/corpus.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
}
