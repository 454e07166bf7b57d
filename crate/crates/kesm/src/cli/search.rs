use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use kesm_core::corpus::encode_document;
use kesm_core::ranking::{
    check_run, features_or_floor, rerank_run, train_ranker, Candidate, Query, QueryCandidates, RankerConfig,
    RawQuery, DEFAULT_FLOOR,
};
use kesm_core::{Document, Executor};
use serde::Serialize;

use super::{finish, read_descriptions, read_documents, Context};
use crate::formats::checkpoint::Checkpoint;
use crate::formats::svmlight::{format_rows, read_rows, FeatureRow};
use crate::formats::trec::{format_run, read_qrels, read_run};
use crate::io::{self, Outputs};
use crate::manifest::manifest_path;
use crate::{Error, Result};

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Queries with their entities (JSON Lines).
    #[arg(long)]
    pub queries: PathBuf,
    /// Candidate documents (JSON Lines).
    #[arg(long)]
    pub docs: PathBuf,
    /// Base run whose candidates are featurised.
    #[arg(long)]
    pub base: PathBuf,
    /// Relevance grades for the exported rows; unjudged rows get grade 0.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub desc: Option<PathBuf>,
    /// Lower bound inside the logarithm.
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub(super) fn features(ctx: &Context, args: FeaturesArgs) -> Result<()> {
    let start = Instant::now();
    if !(args.floor > 0.0) {
        return Err(Error::Usage("--floor must be positive".into()));
    }
    let mut manifest = ctx.manifest("features", &args, None);
    let model = Checkpoint::load(&args.model)?;
    manifest.input(&args.model)?;
    let descriptions = read_descriptions(args.desc.as_ref(), &model.vocab, &mut manifest)?;
    let raw_queries: Vec<RawQuery> = io::read_jsonl(&args.queries)?;
    manifest.input(&args.queries)?;
    let queries: BTreeMap<String, Query> = raw_queries
        .iter()
        .map(|q| (q.query_id.clone(), Query::encode(q, &model.vocab)))
        .collect();
    let mut docs: BTreeMap<String, Document> = BTreeMap::new();
    for raw in read_documents(&args.docs, &mut manifest)? {
        let (doc, _) = encode_document(&raw, &model.vocab)?;
        docs.insert(raw.doc_id, doc);
    }
    let mut base = read_run(&args.base)?;
    manifest.input(&args.base)?;
    let qrels = match &args.qrels {
        Some(p) => {
            manifest.input(p)?;
            read_qrels(p)?
        }
        None => Default::default(),
    };

    // group by query in order of first appearance, candidates by base rank
    let mut order: Vec<String> = Vec::new();
    for e in &base {
        if !order.contains(&e.query_id) {
            order.push(e.query_id.clone());
        }
    }
    base.sort_by_key(|e| (order.iter().position(|q| *q == e.query_id), e.rank));

    let empty = Document::new(String::new(), Vec::new(), Vec::new(), Default::default())?;
    let no_entities: Vec<usize> = Vec::new();
    let computed = ctx.pool.map(base.len(), |i| {
        let e = &base[i];
        let q = queries.get(&e.query_id).map_or(&no_entities, |q| &q.entities);
        let doc = docs.get(&e.doc_id).unwrap_or(&empty);
        features_or_floor(q, doc, &descriptions, &model.params, &model.bank, args.floor)
    });
    let missing_queries = order.iter().filter(|q| !queries.contains_key(*q)).count();
    let missing_docs = base.iter().filter(|e| !docs.contains_key(&e.doc_id)).count();
    let floored = computed.iter().filter(|(_, f)| *f).count();
    if missing_queries > 0 || missing_docs > 0 || floored > 0 {
        log::warn!(
            "{floored} rows use floor features ({missing_queries} unknown queries, {missing_docs} unknown documents)"
        );
    }

    let rows: Vec<FeatureRow> = base
        .iter()
        .zip(computed)
        .map(|(e, (features, _))| FeatureRow {
            query_id: e.query_id.clone(),
            doc_id: e.doc_id.clone(),
            grade: qrels.get(&e.query_id).and_then(|d| d.get(&e.doc_id)).copied().unwrap_or(0),
            features,
        })
        .collect();
    manifest.details = serde_json::json!({ "rows": rows.len(), "floored": floored });
    manifest.time("total", start.elapsed());
    let mut outputs = Outputs::new();
    outputs.add(&args.out, format_rows(&rows).into_bytes());
    finish(outputs, manifest, manifest_path(&args.out))
}

#[derive(Debug, Args, Serialize)]
pub struct RerankArgs {
    /// Feature file from `features`, graded with qrels.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Ranker settings (TOML); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value = "kesm")]
    pub tag: String,
}

pub(super) fn rerank(ctx: &Context, args: RerankArgs) -> Result<()> {
    let start = Instant::now();
    let mut config: RankerConfig = match &args.config {
        Some(p) => io::read_toml(p)?,
        None => RankerConfig::default(),
    };
    if let Some(f) = args.folds {
        config.folds = f;
    }
    if let Some(s) = args.seed {
        config.linear.seed = s;
    }
    if let Some(l) = args.lambda {
        config.linear.lambda = l;
    }
    if let Some(e) = args.epochs {
        config.linear.epochs = e;
    }
    if args.tag.is_empty() || args.tag.contains(char::is_whitespace) {
        return Err(Error::Usage("--tag must be a non-empty word".into()));
    }
    let mut manifest = ctx.manifest("rerank", &(&args, &config), Some(config.linear.seed));
    if let Some(p) = &args.config {
        manifest.input(p)?;
    }
    let rows = read_rows(&args.features)?;
    manifest.input(&args.features)?;
    let base = read_run(&args.base)?;
    manifest.input(&args.base)?;

    let base_info: BTreeMap<(&str, &str), (f64, u32)> = base
        .iter()
        .map(|e| ((e.query_id.as_str(), e.doc_id.as_str()), (e.score, e.rank)))
        .collect();
    let mut queries: Vec<QueryCandidates> = Vec::new();
    let mut outside_base = 0;
    for r in rows {
        let Some(&(base_score, base_rank)) = base_info.get(&(r.query_id.as_str(), r.doc_id.as_str())) else {
            outside_base += 1;
            continue;
        };
        let candidate = Candidate {
            doc_id: r.doc_id,
            grade: r.grade,
            features: r.features,
            base_score,
            base_rank,
        };
        match queries.iter_mut().find(|q| q.query_id == r.query_id) {
            Some(q) => q.candidates.push(candidate),
            None => queries.push(QueryCandidates {
                query_id: r.query_id,
                candidates: vec![candidate],
            }),
        }
    }
    if outside_base > 0 {
        log::warn!("{outside_base} feature rows are not in the base run and are ignored");
    }
    let cv = train_ranker(&queries, &config)?;
    if !cv.skipped_queries.is_empty() {
        log::warn!("{} queries without relevance pairs do not contribute to training", cv.skipped_queries.len());
    }
    let (run, missing) = rerank_run(&base, &cv.scores, &args.tag)?;
    if missing > 0 {
        log::warn!("{missing} base run entries have no features and are ranked last");
    }
    check_run(&run)?;
    manifest.details = serde_json::json!({
        "folds": cv.folds.iter().map(|f| serde_json::json!({
            "fold": f.fold,
            "test_queries": f.test_queries,
            "ranker": f.params,
        })).collect::<Vec<_>>(),
        "skipped_queries": cv.skipped_queries,
        "missing_scores": missing,
    });
    manifest.time("total", start.elapsed());
    let mut outputs = Outputs::new();
    outputs.add(&args.out, format_run(&run).into_bytes());
    finish(outputs, manifest, manifest_path(&args.out))
}
