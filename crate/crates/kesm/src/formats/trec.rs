//! TREC run and qrels files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use kesm_core::ranking::RunEntry;

use crate::{io, Error, Result};

/// Query id → document id → grade.
pub type Qrels = BTreeMap<String, BTreeMap<String, i32>>;

pub fn parse_run(path: &Path, text: &str) -> Result<Vec<RunEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse(path, i + 1, m.to_string());
        if f.len() != 6 {
            return Err(bad("expected `<query_id> Q0 <doc_id> <rank> <score> <tag>`"));
        }
        let rank: u32 = f[3].parse().map_err(|_| bad("rank is not a positive integer"))?;
        if rank == 0 {
            return Err(bad("rank must be at least 1"));
        }
        let score: f64 = f[4].parse().map_err(|_| bad("score is not a number"))?;
        out.push(RunEntry {
            query_id: f[0].to_string(),
            doc_id: f[2].to_string(),
            rank,
            score,
            tag: f[5].to_string(),
        });
    }
    Ok(out)
}

pub fn read_run(path: &Path) -> Result<Vec<RunEntry>> {
    parse_run(path, &io::read_to_string(path)?)
}

pub fn format_run(run: &[RunEntry]) -> String {
    let mut out = String::new();
    for e in run {
        writeln!(out, "{} Q0 {} {} {} {}", e.query_id, e.doc_id, e.rank, e.score, e.tag).unwrap();
    }
    out
}

pub fn parse_qrels(path: &Path, text: &str) -> Result<Qrels> {
    let mut out = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 4 {
            return Err(Error::parse(path, i + 1, "expected `<query_id> 0 <doc_id> <grade>`"));
        }
        let grade: i32 = f[3]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, "grade is not an integer"))?;
        out.entry(f[0].to_string()).or_default().insert(f[2].to_string(), grade);
    }
    Ok(out)
}

pub fn read_qrels(path: &Path) -> Result<Qrels> {
    parse_qrels(path, &io::read_to_string(path)?)
}

pub fn format_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (q, docs) in qrels {
        for (d, g) in docs {
            writeln!(out, "{q} 0 {d} {g}").unwrap();
        }
    }
    out
}
