mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::{INLINE_DOCUMENT, fixtures, synthetic_docs};
use patent_analytics::synthetic::corpus_xml;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patent-analytics"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn ingest_reports_parsed_and_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixtures().join("cli");
    let qlog = dir.path().join("q.jsonl");
    let out = run(
        dir.path(),
        &["ingest", "--store", "s.db", "--input", input.to_str().unwrap(), "--quarantine-log", qlog.to_str().unwrap()],
    );
    let report = stdout_json(&out);
    assert_eq!(report["files_processed"], 2);
    assert_eq!(report["documents_parsed"], 4);
    assert_eq!(report["documents_quarantined"], 1);
    let lines: Vec<Value> =
        std::fs::read_to_string(&qlog).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0]["reason"].as_str().unwrap().contains("20150231"));
}

#[test]
fn train_on_tiny_store_is_user_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.xml"), corpus_xml(&synthetic_docs(10, 1))).unwrap();
    let out = run(dir.path(), &["ingest", "--store", "s.db", "--input", "tiny.xml"]);
    assert!(out.status.success());
    let out = run(dir.path(), &["train", "--store", "s.db", "--model", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient data"));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["ingest"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    let out = run(dir.path(), &["ingest", "--store", "s.db", "--input", "missing-dir"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["fetch", "--from", "2024-02-01", "--to", "2024-01-01"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fetch_lists_weekly_files() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&run(dir.path(), &["fetch", "--from", "2024-01-01", "--to", "2024-01-31"]));
    let dates: Vec<&str> = v.as_array().unwrap().iter().map(|f| f["date"].as_str().unwrap()).collect();
    assert_eq!(dates, ["2024-01-02", "2024-01-09", "2024-01-16", "2024-01-23", "2024-01-30"]);
    assert!(v[0]["url"].as_str().unwrap().ends_with("/2024/ipg240102.zip"));
}

#[test]
fn full_pipeline_through_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("corpus.xml"), corpus_xml(&synthetic_docs(200, 8))).unwrap();
    let config = serde_json::json!({
        "store_path": "s.db",
        "model_path": "m.json",
        "hash_dim": 256,
        "rounds_grid": [20],
        "trained_at": "2024-01-01T00:00:00Z"
    });
    std::fs::write(dir.path().join("run.json"), config.to_string()).unwrap();
    let cfg = ["--config", "run.json"];

    let report =
        stdout_json(&run(dir.path(), &[&cfg[..], &["ingest", "--input", "corpus.xml", "--jobs", "2"]].concat()));
    assert_eq!(report["documents_quarantined"], 0);

    let trained = stdout_json(&run(dir.path(), &[&cfg[..], &["train"]].concat()));
    assert_eq!(
        trained["train_rows"].as_u64().unwrap()
            + trained["calibration_rows"].as_u64().unwrap()
            + trained["test_rows"].as_u64().unwrap(),
        200
    );
    let again = stdout_json(&run(dir.path(), &[&cfg[..], &["train"]].concat()));
    assert_eq!(trained["model_id"], again["model_id"]);

    let eval = stdout_json(&run(dir.path(), &[&cfg[..], &["evaluate"]].concat()));
    assert!((eval["mae_days"].as_f64().unwrap() - trained["metrics"]["mae_days"].as_f64().unwrap()).abs() < 1e-9);

    let mut child = bin()
        .current_dir(dir.path())
        .args([&cfg[..], &["predict"]].concat())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(INLINE_DOCUMENT.as_bytes()).unwrap();
    let p = stdout_json(&child.wait_with_output().unwrap());
    assert_eq!(p["model_id"], trained["model_id"]);

    let out = run(dir.path(), &[&cfg[..], &["predict", "--model", "absent.json"]].concat());
    assert_eq!(out.status.code(), Some(1));

    let docs = synthetic_docs(200, 8);
    let org = patent_analytics::store::resolve_organisation(&docs[0].assignees[0], &Default::default()).unwrap();
    let s = stdout_json(&run(
        dir.path(),
        &[&cfg[..], &["summary", "--kind", "org", "--id", &org.key.canonical_id]].concat(),
    ));
    assert!(s["total_grants"].as_u64().unwrap() >= 1);
    let out = run(dir.path(), &[&cfg[..], &["summary", "--kind", "org", "--id", "no-such-org"]].concat());
    assert_eq!(out.status.code(), Some(1));
}
