//! Drives the `docrefine` binary end to end on the fixture corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn docrefine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docrefine")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = docrefine(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Structures the fixture corpus into a fresh store.
fn structured_store(dir: &Path) -> PathBuf {
    let store = dir.join("store");
    ok(&["structure", "--input", s(&fixtures().join("docs.jsonl")), "--store", s(&store)]);
    store
}

fn refine_at(dir: &Path, store: &Path, budget: usize, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("refined-{budget}.jsonl"));
    let b = budget.to_string();
    let (queries, docs) = (fixtures().join("queries.jsonl"), fixtures().join("docs.jsonl"));
    let mut args = vec!["refine", "--input", s(&queries), "--docs", s(&docs), "--store", s(store), "--budget", &b, "--output", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn check_golden(name: &str, actual: &str) {
    let path = fixtures().join("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {}; rerun with UPDATE_GOLDEN=1", path.display()));
    assert!(expected == actual, "output differs from {}", path.display());
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = docrefine(&["structure", "--input", "/nonexistent/docs.jsonl", "--store", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn invalid_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let q = fixtures().join("queries.jsonl");
    let d = fixtures().join("docs.jsonl");
    for extra in
        [&["--budget", "0"][..], &["--jobs", "0"], &["--k", "0"], &["--overflow", "sometimes"], &["--tokenizer", "bpe:/nonexistent"]]
    {
        let mut args = vec!["refine", "--input", s(&q), "--docs", s(&d), "--store", s(&store)];
        args.extend_from_slice(extra);
        assert_eq!(docrefine(&args).status.code(), Some(2), "{extra:?}");
    }
}

#[test]
fn unknown_document_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let queries = dir.path().join("q.jsonl");
    fs::write(&queries, r#"{"query_id":"x","query":"Who?","doc_ids":["nope"],"golden_answers":[]}"#).unwrap();
    let out = docrefine(&[
        "refine",
        "--input",
        s(&queries),
        "--docs",
        s(&fixtures().join("docs.jsonl")),
        "--store",
        s(&dir.path().join("store")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn smaller_k_gives_shorter_labels() {
    let dir = tempfile::tempdir().unwrap();
    let label_tokens = |k: &str| {
        let out = dir.path().join(format!("pairs-{k}.jsonl"));
        ok(&["build-labels", "--k", k, "--input", s(&fixtures().join("pages.jsonl")), "--output", s(&out)]);
        let stats: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("pairs-{k}.jsonl.stats.json"))).unwrap()).unwrap();
        assert_eq!(jsonl(&out).len() as u64, stats["pairs"].as_u64().unwrap());
        stats["label_tokens"].as_u64().unwrap()
    };
    let (k3, k10) = (label_tokens("3"), label_tokens("10"));
    assert!(k3 < k10, "k=3 labels {k3} tokens, k=10 labels {k10}");
}

#[test]
fn rerunning_structure_hits_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = structured_store(dir.path());
    let summary: Value =
        serde_json::from_str(&ok(&["structure", "--json", "--input", s(&fixtures().join("docs.jsonl")), "--store", s(&store)])).unwrap();
    assert_eq!(summary["hits"], summary["docs"]);
    assert_eq!(summary["structurer_calls"], 0);
}

#[test]
fn corrupt_and_stale_records_are_restructured() {
    let dir = tempfile::tempdir().unwrap();
    let store = structured_store(dir.path());
    let record = walk(&store.join("records")).into_iter().next().expect("a record file");
    fs::write(&record, b"{\"truncated").unwrap();

    let mut docs: Vec<Value> = jsonl(&fixtures().join("docs.jsonl"));
    docs[1]["text"] = Value::String(format!("{} Edited.", docs[1]["text"].as_str().unwrap()));
    let edited = dir.path().join("docs.jsonl");
    fs::write(&edited, docs.iter().map(|d| format!("{d}\n")).collect::<String>()).unwrap();

    let rows = dir.path().join("outcomes.jsonl");
    let summary: Value =
        serde_json::from_str(&ok(&["structure", "--json", "--input", s(&edited), "--store", s(&store), "--output", s(&rows)])).unwrap();
    assert_eq!(summary["quarantined"], 1);
    assert_eq!(summary["stale"], 1);
    assert_eq!(summary["structured"], 2);
    let mut misses: Vec<String> = jsonl(&rows).iter().filter_map(|r| r["miss"].as_str().map(String::from)).collect();
    misses.sort();
    assert_eq!(misses, ["corrupt", "stale"]);
    assert_eq!(fs::read_dir(store.join("quarantine")).unwrap().count(), 1);
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn without_latency(rows: &[Value]) -> String {
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            let o = r.as_object_mut().unwrap();
            o.remove("latency_ms");
            o.remove("engine_latency_ms");
            format!("{r}\n")
        })
        .collect()
}

#[test]
fn refine_output_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let store = structured_store(dir.path());
    let rows = jsonl(&refine_at(dir.path(), &store, 500, &[]));
    assert_eq!(rows.len(), 105);
    for r in &rows {
        assert!(r["tokens"].as_u64().unwrap() <= 500);
    }
    check_golden("refine_b500.jsonl", &without_latency(&rows));
}

#[test]
fn refine_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let store = structured_store(dir.path());
    let a = jsonl(&refine_at(dir.path(), &store, 1000, &["--jobs", "1"]));
    let b = jsonl(&refine_at(dir.path(), &store, 1000, &["--jobs", "4"]));
    assert_eq!(without_latency(&a), without_latency(&b));
}

#[test]
fn smaller_budget_selects_a_subset() {
    let dir = tempfile::tempdir().unwrap();
    let store = structured_store(dir.path());
    let small = jsonl(&refine_at(dir.path(), &store, 500, &[]));
    let large = jsonl(&refine_at(dir.path(), &store, 2000, &[]));
    for (a, b) in small.iter().zip(&large) {
        assert_eq!(a["query_id"], b["query_id"]);
        for (doc, ids) in a["selected_ids"].as_object().unwrap() {
            let big: Vec<&Value> = b["selected_ids"][doc].as_array().unwrap().iter().collect();
            for id in ids.as_array().unwrap() {
                assert!(big.contains(&id), "{} {doc}: node {id} dropped at the larger budget", a["query_id"]);
            }
        }
    }
}

#[test]
fn eval_reports_baseline_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let store = structured_store(dir.path());
    let small = refine_at(dir.path(), &store, 250, &[]);
    let large = refine_at(dir.path(), &store, 2000, &[]);
    let metrics = dir.path().join("metrics.json");
    ok(&[
        "eval",
        "--input",
        s(&small),
        "--compare",
        s(&large),
        "--queries",
        s(&fixtures().join("queries.jsonl")),
        "--docs",
        s(&fixtures().join("docs.jsonl")),
        "--output",
        s(&metrics),
    ]);
    let m: Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    let full = m["a"]["full_content"]["recall"].as_f64().unwrap();
    let (ra, rb) = (m["a"]["recall"].as_f64().unwrap(), m["b"]["recall"].as_f64().unwrap());
    assert!(ra <= rb && rb <= full, "recall {ra} / {rb} / full {full}");
    assert!(m["recall_delta"].as_f64().unwrap() >= 0.0);
    let frozen = format!(
        "{}\n",
        serde_json::json!({ "recall_250": m["a"]["recall"], "recall_2000": m["b"]["recall"], "recall_full": full, "gamma_250": m["a"]["mean_gamma"], "gamma_2000": m["b"]["mean_gamma"] })
    );
    check_golden("metrics.json", &frozen);
}

#[test]
fn bench_is_deterministic_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "bench",
            "--docs",
            s(&fixtures().join("docs.jsonl")),
            "--queries",
            s(&fixtures().join("queries.jsonl")),
            "--iterations",
            "2",
            "--pad-to",
            "3000",
            "--seed",
            "3",
            "--output",
            s(&out),
        ]);
        let mut v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        assert_eq!(v["stages"].as_array().unwrap().len(), 5);
        v.as_object_mut().unwrap().remove("stages");
        v.as_object_mut().unwrap().remove("online");
        v
    };
    let (a, b) = (run("a.json"), run("b.json"));
    assert_eq!(a, b);
    assert!(a["doc_tokens"].as_array().unwrap().iter().all(|t| t.as_u64().unwrap() >= 3000));
}
