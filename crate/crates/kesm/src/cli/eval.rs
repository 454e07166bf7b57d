use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Subcommand};
use kesm_core::eval::{
    err_at_k, ndcg_at_k, permutation_test, precision_recall_at_k, win_tie_loss, DEFAULT_CUTOFF,
    DEFAULT_PERMUTATIONS, DEFAULT_TIE_TOLERANCE,
};
use serde::Serialize;

use super::{finish, read_documents, Context};
use crate::formats::trec::{read_qrels, read_run};
use crate::formats::tsv::{format_report, read_rankings, ReportRow, ALL_UNIT};
use crate::io::Outputs;
use crate::manifest::{manifest_path, Manifest};
use crate::Result;

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// P@1, P@5, R@1 and R@5 of entity rankings against salience labels.
    Salience(SalienceArgs),
    /// NDCG@20 and ERR@20 of TREC runs against qrels.
    Search(SearchArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Report file; the report goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-unit differences within this are ties.
    #[arg(long, default_value_t = DEFAULT_TIE_TOLERANCE)]
    pub tie_tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SalienceArgs {
    /// Prediction TSV; repeat to compare systems against the first.
    #[arg(long = "pred", required = true)]
    pub preds: Vec<PathBuf>,
    #[arg(long)]
    pub docs: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    /// TREC run; repeat to compare systems against the first.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

pub(super) fn eval(ctx: &Context, command: EvalCommand) -> Result<()> {
    match command {
        EvalCommand::Salience(a) => salience(ctx, a),
        EvalCommand::Search(a) => search(ctx, a),
    }
}

/// Run label → metric → unit → value.
type Table = Vec<(String, BTreeMap<&'static str, BTreeMap<String, f64>>)>;

/// File stems, made unique by appending the position when they collide.
fn labels(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
        .collect();
    stems
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if stems.iter().filter(|t| *t == s).count() > 1 {
                format!("{s}#{}", i + 1)
            } else {
                s.clone()
            }
        })
        .collect()
}

fn report_rows(table: &Table, metrics: &[&'static str], args: &ReportArgs) -> Result<Vec<ReportRow>> {
    let single = table.len() == 1;
    let name = |label: &str, metric: &str| {
        if single {
            metric.to_string()
        } else {
            format!("{label}:{metric}")
        }
    };
    let mut rows = Vec::new();
    let units: BTreeSet<&String> = table.iter().flat_map(|(_, m)| m.values().flat_map(BTreeMap::keys)).collect();
    for unit in units {
        for (label, by_metric) in table {
            for m in metrics {
                if let Some(&v) = by_metric[m].get(unit) {
                    rows.push(ReportRow { unit: unit.clone(), metric: name(label, m), value: v });
                }
            }
        }
    }
    for (label, by_metric) in table {
        for m in metrics {
            let values = &by_metric[m];
            let mean = if values.is_empty() { 0.0 } else { values.values().sum::<f64>() / values.len() as f64 };
            rows.push(ReportRow { unit: ALL_UNIT.into(), metric: name(label, m), value: mean });
        }
    }
    let (base_label, base) = &table[0];
    for (label, by_metric) in &table[1..] {
        for m in metrics {
            let (a, b) = (&by_metric[m], &base[m]);
            let wtl = win_tie_loss(a, b, args.tie_tolerance)?;
            let diffs: Vec<f64> = a.values().zip(b.values()).map(|(x, y)| x - y).collect();
            let p = permutation_test(&diffs, args.permutations, args.seed);
            let prefix = format!("{label}-vs-{base_label}:{m}");
            for (what, v) in [
                ("wins", wtl.wins as f64),
                ("ties", wtl.ties as f64),
                ("losses", wtl.losses as f64),
                ("p_value", p),
            ] {
                rows.push(ReportRow { unit: ALL_UNIT.into(), metric: format!("{prefix}:{what}"), value: v });
            }
        }
    }
    Ok(rows)
}

fn emit(rows: &[ReportRow], args: &ReportArgs, mut manifest: Manifest, start: Instant) -> Result<()> {
    let text = format_report(rows);
    match &args.out {
        Some(out) => {
            manifest.time("total", start.elapsed());
            let mut outputs = Outputs::new();
            outputs.add(out, text.into_bytes());
            finish(outputs, manifest, manifest_path(out))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

const SALIENCE_METRICS: [&str; 4] = ["P@1", "P@5", "R@1", "R@5"];

fn salience(ctx: &Context, args: SalienceArgs) -> Result<()> {
    let start = Instant::now();
    let mut manifest = ctx.manifest("eval-salience", &args, Some(args.report.seed));
    let docs = read_documents(&args.docs, &mut manifest)?;
    let mut relevant: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for d in &docs {
        let mentioned: BTreeSet<&str> = d.entities.iter().map(|m| m.id.as_str()).collect();
        let rel: BTreeSet<String> = d.salient.iter().filter(|s| mentioned.contains(s.as_str())).cloned().collect();
        if !rel.is_empty() {
            relevant.insert(d.doc_id.clone(), rel);
        }
    }
    if relevant.len() < docs.len() {
        log::warn!("{} documents without salient entities are not evaluated", docs.len() - relevant.len());
    }

    let mut table: Table = Vec::new();
    for (path, label) in args.preds.iter().zip(labels(&args.preds)) {
        let rankings = read_rankings(path)?;
        manifest.input(path)?;
        let unknown = rankings.keys().filter(|d| !relevant.contains_key(*d)).count();
        if unknown > 0 {
            log::warn!("{}: {unknown} documents are not evaluated", path.display());
        }
        let mut by_metric: BTreeMap<&'static str, BTreeMap<String, f64>> = BTreeMap::new();
        for (doc, rel) in &relevant {
            let ranking = rankings.get(doc).map(Vec::as_slice).unwrap_or(&[]);
            for (k, p_name, r_name) in [(1, "P@1", "R@1"), (5, "P@5", "R@5")] {
                let (p, r) = precision_recall_at_k(ranking, rel, k)?.expect("relevant set is non-empty");
                by_metric.entry(p_name).or_default().insert(doc.clone(), p);
                by_metric.entry(r_name).or_default().insert(doc.clone(), r);
            }
        }
        for m in SALIENCE_METRICS {
            by_metric.entry(m).or_default();
        }
        table.push((label, by_metric));
    }
    let rows = report_rows(&table, &SALIENCE_METRICS, &args.report)?;
    emit(&rows, &args.report, manifest, start)
}

fn search(ctx: &Context, args: SearchArgs) -> Result<()> {
    let start = Instant::now();
    let mut manifest = ctx.manifest("eval-search", &args, Some(args.report.seed));
    let qrels = read_qrels(&args.qrels)?;
    manifest.input(&args.qrels)?;
    let g_max = qrels.values().flat_map(|d| d.values().copied()).max().unwrap_or(1).max(1);

    let mut runs = Vec::new();
    for path in &args.runs {
        let run = read_run(path)?;
        manifest.input(path)?;
        let mut by_query: BTreeMap<String, Vec<(u32, String)>> = BTreeMap::new();
        for e in run {
            by_query.entry(e.query_id).or_default().push((e.rank, e.doc_id));
        }
        let ranked: BTreeMap<String, Vec<String>> = by_query
            .into_iter()
            .map(|(q, mut v)| {
                v.sort();
                (q, v.into_iter().map(|(_, d)| d).collect())
            })
            .collect();
        runs.push(ranked);
    }

    let in_runs: BTreeSet<&String> = runs.iter().flat_map(BTreeMap::keys).collect();
    let judged = |q: &str| qrels.get(q).is_some_and(|d| d.values().any(|&g| g > 0));
    let units: Vec<&String> = in_runs.iter().copied().filter(|q| judged(q)).collect();
    let skipped = in_runs.len() - units.len();
    if skipped > 0 {
        log::warn!("{skipped} queries without relevant judgements are skipped");
    }

    let mut table: Table = Vec::new();
    for (run, label) in runs.iter().zip(labels(&args.runs)) {
        let mut by_metric: BTreeMap<&'static str, BTreeMap<String, f64>> = BTreeMap::new();
        by_metric.insert("NDCG@20", BTreeMap::new());
        by_metric.insert("ERR@20", BTreeMap::new());
        for &q in &units {
            let ranking = run.get(q).map(Vec::as_slice).unwrap_or(&[]);
            let grades = &qrels[q];
            let ndcg = ndcg_at_k(ranking, grades, DEFAULT_CUTOFF).expect("query has a relevant document");
            by_metric.get_mut("NDCG@20").unwrap().insert(q.clone(), ndcg);
            by_metric.get_mut("ERR@20").unwrap().insert(q.clone(), err_at_k(ranking, grades, DEFAULT_CUTOFF, g_max));
        }
        table.push((label, by_metric));
    }
    let rows = report_rows(&table, &["NDCG@20", "ERR@20"], &args.report)?;
    emit(&rows, &args.report, manifest, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colliding_stems_are_numbered() {
        let paths = [PathBuf::from("a/run.tsv"), PathBuf::from("b/run.tsv"), PathBuf::from("x.tsv")];
        assert_eq!(labels(&paths), ["run#1", "run#2", "x"]);
    }
}
