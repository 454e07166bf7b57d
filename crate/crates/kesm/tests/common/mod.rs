//! Shared fixtures: a small synthetic corpus plus a search collection built
//! from it.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn kesm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kesm"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("kesm binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = kesm(args);
    assert!(
        out.status.success(),
        "kesm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

pub const SMALL_SPEC: &str = "topics = 3\nentities_per_topic = 6\nwords_per_topic = 10\nfiller_words = 10\n\
train_docs = 40\ndev_docs = 20\ntest_docs = 20\nmin_doc_len = 15\nmax_doc_len = 25\n";

/// Generates the small corpus into `dir`.
pub fn small_corpus(dir: &Path) {
    fs::write(dir.join("spec.toml"), SMALL_SPEC).unwrap();
    ok(&["gen-synthetic", "--spec", &p(dir, "spec.toml"), "--seed", "3", "--out", &p(dir, "corpus")]);
    ok(&[
        "build-vocab",
        "--docs",
        &p(dir, "corpus/train.jsonl"),
        "--out",
        &p(dir, "vocab.json"),
    ]);
}

pub fn train_args(dir: &Path, out: &str, threads: &str) -> Vec<String> {
    [
        "--threads",
        threads,
        "train",
        "--train",
        &p(dir, "corpus/train.jsonl"),
        "--dev",
        &p(dir, "corpus/dev.jsonl"),
        "--desc",
        &p(dir, "corpus/descriptions.jsonl"),
        "--vocab",
        &p(dir, "vocab.json"),
        "--dim",
        "8",
        "--max-epochs",
        "2",
        "--eval-interval",
        "5",
        "--seed",
        "7",
        "--out",
        out,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// One query per topic naming its first two entities; the test documents of
/// that topic are relevant (grade 1, or 2 when they mention a query entity).
/// The base run lists every test document for every query in document
/// order with descending scores.
pub fn search_collection(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let docs: Vec<serde_json::Value> = fs::read_to_string(dir.join("corpus/test.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let (mut queries, mut run, mut qrels) = (String::new(), String::new(), String::new());
    for t in 0..3 {
        let q = format!("q{t}");
        let ents = [format!("T{t}_E00"), format!("T{t}_E01")];
        writeln!(queries, "{}", serde_json::json!({"query_id": q, "words": [], "entities": ents})).unwrap();
        for (i, d) in docs.iter().enumerate() {
            let id = d["doc_id"].as_str().unwrap();
            writeln!(run, "{q} Q0 {id} {} {} base", i + 1, 100 - i).unwrap();
            let salient: Vec<&str> = d["salient"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
            if salient.iter().any(|s| s.starts_with(&format!("T{t}_"))) {
                let grade = if salient.iter().any(|s| ents.iter().any(|e| e == s)) { 2 } else { 1 };
                writeln!(qrels, "{q} 0 {id} {grade}").unwrap();
            } else {
                writeln!(qrels, "{q} 0 {id} 0").unwrap();
            }
        }
    }
    let (qp, rp, jp) = (dir.join("queries.jsonl"), dir.join("base.trec"), dir.join("qrels.txt"));
    fs::write(&qp, queries).unwrap();
    fs::write(&rp, run).unwrap();
    fs::write(&jp, qrels).unwrap();
    (qp, rp, jp)
}
