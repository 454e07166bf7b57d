//! Salience-based ranking features for ad hoc search.
//!
//! For query entities `E_q` and document `d`,
//! `Ψ(q, d) = Σ_{e ∈ E_q} log(max(KIM(e, d) / |E_d|, floor))`, element-wise
//! over the `2K` kernels, where `|E_d|` counts mention occurrences. The
//! features plus the base retrieval score are combined by a pairwise linear
//! ranker trained with query-level cross-validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::{train_linear_pairwise, LinearRankerParams, LinearTrainConfig};
use crate::corpus::{DescriptionStore, Document};
use crate::math::fnv1a;
use crate::model::{encode_entity, DocContext, KernelBank, ModelParams};
use crate::vocab::Vocabulary;
use crate::{Error, Result};

/// Lower bound applied inside the logarithm.
pub const DEFAULT_FLOOR: f64 = 1e-10;
pub const DEFAULT_FOLDS: usize = 5;
pub const BASE_SCORE_FEATURE: &str = "base_score";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawQuery {
    pub query_id: String,
    #[serde(default)]
    pub words: Vec<String>,
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub words: Vec<String>,
    pub entities: Vec<usize>,
}

impl Query {
    /// Unseen entities map to `Unk_entity` and still contribute features.
    pub fn encode(raw: &RawQuery, vocab: &Vocabulary) -> Self {
        Self {
            query_id: raw.query_id.clone(),
            words: raw.words.clone(),
            entities: raw.entities.iter().map(|e| vocab.entity(e)).collect(),
        }
    }
}

/// `Ψ(q, d)`: `2K` log-normalised kernel features.
pub fn query_doc_features(
    query_entities: &[usize],
    doc: &Document,
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
    floor: f64,
) -> Result<Vec<f64>> {
    if query_entities.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if doc.mentions.is_empty() {
        return Err(Error::NoEntities(doc.doc_id.clone()));
    }
    let ctx = DocContext::new(doc, descriptions, params);
    let total = ctx.total_mentions as f64;
    let mut out = vec![0.0; 2 * bank.len()];
    for &e in query_entities {
        let scores = match ctx.encoding(e) {
            Some(enc) => ctx.kim(enc, params, bank),
            None => ctx.kim(&encode_entity(e, descriptions, params), params, bank),
        };
        for (o, s) in out.iter_mut().zip(scores.concat()) {
            *o += libm::log((s / total).max(floor));
        }
    }
    Ok(out)
}

/// The fallback vector for an empty query or an entity-less document: every
/// query entity contributes `log(floor)`.
pub fn floor_features(n_query_entities: usize, n_kernels: usize, floor: f64) -> Vec<f64> {
    vec![n_query_entities.max(1) as f64 * libm::log(floor); 2 * n_kernels]
}

/// [`query_doc_features`] with the floor fallback substituted on error.
pub fn features_or_floor(
    query_entities: &[usize],
    doc: &Document,
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
    floor: f64,
) -> (Vec<f64>, bool) {
    match query_doc_features(query_entities, doc, descriptions, params, bank, floor) {
        Ok(f) => (f, false),
        Err(_) => (floor_features(query_entities.len(), bank.len(), floor), true),
    }
}

/// Names of the ranker inputs: `2K` salience features then the base score.
pub fn ranker_feature_names(n_kernels: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..n_kernels).map(|k| format!("entity_kernel_{k}")).collect();
    names.extend((0..n_kernels).map(|k| format!("word_kernel_{k}")));
    names.push(BASE_SCORE_FEATURE.to_string());
    names
}

/// Linear ranker over `Ψ(q, d) ⊔ base_score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankerParams(pub LinearRankerParams);

impl RankerParams {
    pub fn new(linear: LinearRankerParams) -> Result<Self> {
        let n = linear.dim();
        if n == 0 || n % 2 == 0 || linear.feature_names.last().map(String::as_str) != Some(BASE_SCORE_FEATURE) {
            return Err(Error::InvalidArgument(
                "ranker needs 2K salience features followed by base_score".into(),
            ));
        }
        Ok(Self(linear))
    }

    pub fn zeros(n_features: usize) -> Self {
        let mut names: Vec<String> = (0..n_features).map(|i| format!("f{i}")).collect();
        names.push(BASE_SCORE_FEATURE.into());
        Self(LinearRankerParams::zeros(names))
    }

    pub fn feature_dim(&self) -> usize {
        self.0.dim() - 1
    }
}

/// `W_r · standardized(features ⊔ base_score)`.
pub fn rank_score(features: &[f64], base_score: f64, ranker: &RankerParams) -> Result<f64> {
    if features.len() != ranker.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: ranker.feature_dim(),
            found: features.len(),
        });
    }
    let mut x = features.to_vec();
    x.push(base_score);
    ranker.0.score(&x)
}

/// One judged (or unjudged) candidate document of a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    /// Relevance grade; unjudged documents carry 0.
    pub grade: i32,
    pub features: Vec<f64>,
    pub base_score: f64,
    pub base_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCandidates {
    pub query_id: String,
    pub candidates: Vec<Candidate>,
}

impl QueryCandidates {
    /// Pairs (relevant, non-relevant) with grade > 0 vs grade ≤ 0.
    fn pairs(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let input = |c: &Candidate| {
            let mut x = c.features.clone();
            x.push(c.base_score);
            x
        };
        let mut out = Vec::new();
        for pos in self.candidates.iter().filter(|c| c.grade > 0) {
            for neg in self.candidates.iter().filter(|c| c.grade <= 0) {
                out.push((input(pos), input(neg)));
            }
        }
        out
    }
}

/// Fold of a query, from a stable hash of its id.
pub fn fold_of(query_id: &str, folds: usize) -> usize {
    (fnv1a(query_id.as_bytes()) % folds as u64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerConfig {
    pub folds: usize,
    pub linear: LinearTrainConfig,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            linear: LinearTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldModel {
    pub fold: usize,
    pub test_queries: Vec<String>,
    pub params: RankerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: Vec<FoldModel>,
    /// Held-out score of every candidate, keyed by (query id, doc id).
    pub scores: BTreeMap<(String, String), f64>,
    /// Training queries without any (relevant, non-relevant) pair.
    pub skipped_queries: BTreeSet<String>,
}

/// k-fold cross-validated pairwise training. Each fold's model is trained on
/// the queries of the other folds and scores the held-out queries.
pub fn train_ranker(queries: &[QueryCandidates], config: &RankerConfig) -> Result<CrossValidation> {
    if config.folds == 0 {
        return Err(Error::InvalidArgument("folds must be at least 1".into()));
    }
    let dim = queries
        .iter()
        .flat_map(|q| q.candidates.first())
        .map(|c| c.features.len())
        .next()
        .unwrap_or(0);
    let names = {
        let mut n: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
        n.push(BASE_SCORE_FEATURE.into());
        n
    };
    for q in queries {
        for c in &q.candidates {
            if c.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.features.len(),
                });
            }
        }
    }

    let pairs: Vec<Vec<(Vec<f64>, Vec<f64>)>> = queries.iter().map(QueryCandidates::pairs).collect();
    let skipped_queries = queries
        .iter()
        .zip(&pairs)
        .filter(|(_, p)| p.is_empty())
        .map(|(q, _)| q.query_id.clone())
        .collect();
    let assignment: Vec<usize> = queries
        .iter()
        .map(|q| if config.folds == 1 { 0 } else { fold_of(&q.query_id, config.folds) })
        .collect();

    let mut out = CrossValidation {
        folds: Vec::new(),
        scores: BTreeMap::new(),
        skipped_queries,
    };
    for fold in 0..config.folds {
        let test: Vec<usize> = (0..queries.len()).filter(|&i| assignment[i] == fold).collect();
        if test.is_empty() {
            continue;
        }
        let train: Vec<(Vec<f64>, Vec<f64>)> = (0..queries.len())
            .filter(|&i| config.folds == 1 || assignment[i] != fold)
            .flat_map(|i| pairs[i].iter().cloned())
            .collect();
        if train.is_empty() {
            return Err(Error::NoTrainingPairs(format!("fold {fold} has no training pairs")));
        }
        let fit = train_linear_pairwise(&train, names.clone(), &config.linear)?;
        let params = RankerParams::new(fit.params)?;
        for &i in &test {
            let q = &queries[i];
            for c in &q.candidates {
                let s = rank_score(&c.features, c.base_score, &params)?;
                out.scores.insert((q.query_id.clone(), c.doc_id.clone()), s);
            }
        }
        out.folds.push(FoldModel {
            fold,
            test_queries: test.iter().map(|&i| queries[i].query_id.clone()).collect(),
            params,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub query_id: String,
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
    pub tag: String,
}

/// Re-sorts every query of `base` by `scores` (descending), breaking ties by
/// base rank and then doc id, and renumbers ranks from 1. Queries keep their
/// order of first appearance. Entries without a score sink to the bottom;
/// their number is returned alongside the run.
pub fn rerank_run(
    base: &[RunEntry],
    scores: &BTreeMap<(String, String), f64>,
    tag: &str,
) -> Result<(Vec<RunEntry>, usize)> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_query: BTreeMap<&str, Vec<&RunEntry>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for e in base {
        if !seen.insert((e.query_id.as_str(), e.doc_id.as_str())) {
            return Err(Error::DuplicateRunEntry {
                query_id: e.query_id.clone(),
                doc_id: e.doc_id.clone(),
            });
        }
        by_query
            .entry(&e.query_id)
            .or_insert_with(|| {
                order.push(&e.query_id);
                Vec::new()
            })
            .push(e);
    }

    let mut missing = 0;
    let mut out = Vec::with_capacity(base.len());
    for q in order {
        let mut rows: Vec<(f64, &RunEntry)> = by_query[q]
            .iter()
            .map(|e| {
                let s = scores
                    .get(&(e.query_id.clone(), e.doc_id.clone()))
                    .copied()
                    .filter(|s| !s.is_nan());
                if s.is_none() {
                    missing += 1;
                }
                (s.unwrap_or(f64::NEG_INFINITY), *e)
            })
            .collect();
        rows.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.rank.cmp(&b.1.rank))
                .then(a.1.doc_id.cmp(&b.1.doc_id))
        });
        for (i, (s, e)) in rows.into_iter().enumerate() {
            out.push(RunEntry {
                query_id: e.query_id.clone(),
                doc_id: e.doc_id.clone(),
                rank: i as u32 + 1,
                score: s,
                tag: tag.to_string(),
            });
        }
    }
    Ok((out, missing))
}

/// Checks ranks 1..n without gaps and non-increasing scores within each query.
pub fn check_run(run: &[RunEntry]) -> Result<()> {
    let mut last: BTreeMap<&str, (u32, f64)> = BTreeMap::new();
    for e in run {
        let prev = last.get(e.query_id.as_str()).copied();
        let (expected, ok_score) = match prev {
            None => (1, true),
            Some((r, s)) => (r + 1, e.score <= s),
        };
        if e.rank != expected || !ok_score {
            return Err(Error::InvalidArgument(format!(
                "run entry {} / {} breaks rank order",
                e.query_id, e.doc_id
            )));
        }
        last.insert(&e.query_id, (e.rank, e.score));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Mention;

    fn entry(q: &str, d: &str, rank: u32, score: f64) -> RunEntry {
        RunEntry {
            query_id: q.into(),
            doc_id: d.into(),
            rank,
            score,
            tag: "base".into(),
        }
    }

    fn scores(pairs: &[(&str, &str, f64)]) -> BTreeMap<(String, String), f64> {
        pairs.iter().map(|(q, d, s)| (((*q).into(), (*d).into()), *s)).collect()
    }

    #[test]
    fn rerank_sorts_by_new_score() {
        let base = vec![entry("1", "a", 1, 3.0), entry("1", "b", 2, 2.0), entry("1", "c", 3, 1.0)];
        let s = scores(&[("1", "a", 0.1), ("1", "b", 0.9), ("1", "c", 0.5)]);
        let (run, missing) = rerank_run(&base, &s, "new").unwrap();
        assert_eq!(missing, 0);
        let ranks: BTreeMap<&str, u32> = run.iter().map(|e| (e.doc_id.as_str(), e.rank)).collect();
        assert_eq!((ranks["a"], ranks["b"], ranks["c"]), (3, 1, 2));
        assert!(run.iter().all(|e| e.tag == "new"));
        check_run(&run).unwrap();
    }

    #[test]
    fn constant_scores_keep_base_order() {
        let base = vec![entry("7", "z", 1, 3.0), entry("7", "a", 2, 2.0), entry("8", "m", 1, 1.0)];
        let s = scores(&[("7", "z", 0.0), ("7", "a", 0.0), ("8", "m", 0.0)]);
        let (run, _) = rerank_run(&base, &s, "t").unwrap();
        let ids: Vec<&str> = run.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["z", "a", "m"]);
        let same = scores(&[("7", "z", 3.0), ("7", "a", 2.0), ("8", "m", 1.0)]);
        let (run2, _) = rerank_run(&base, &same, "t").unwrap();
        assert_eq!(run2.iter().map(|e| e.doc_id.as_str()).collect::<Vec<_>>(), ids);
    }

    #[test]
    fn missing_scores_sink_and_duplicates_fail() {
        let base = vec![entry("1", "a", 1, 3.0), entry("1", "b", 2, 2.0)];
        let (run, missing) = rerank_run(&base, &scores(&[("1", "b", -5.0)]), "t").unwrap();
        assert_eq!(missing, 1);
        assert_eq!(run[0].doc_id, "b");
        let dup = vec![entry("1", "a", 1, 3.0), entry("1", "a", 2, 2.0)];
        assert!(matches!(
            rerank_run(&dup, &BTreeMap::new(), "t"),
            Err(Error::DuplicateRunEntry { .. })
        ));
    }

    #[test]
    fn zero_ranker_scores_zero() {
        let r = RankerParams::zeros(4);
        assert_eq!(rank_score(&[1.0, 2.0, 3.0, 4.0], 9.0, &r).unwrap(), 0.0);
        assert!(rank_score(&[1.0], 9.0, &r).is_err());
    }

    fn doc() -> Document {
        let mentions = vec![
            Mention { entity: 5, position: 0 },
            Mention { entity: 6, position: 1 },
            Mention { entity: 5, position: 2 },
        ];
        Document::new("d", vec![2, 3, 4], mentions, BTreeSet::new()).unwrap()
    }

    #[test]
    fn empty_inputs_error_and_fall_back() {
        let p = ModelParams::init(8, 4, 3, 11, 1);
        let bank = KernelBank::default();
        let descs = DescriptionStore::new();
        assert_eq!(
            query_doc_features(&[], &doc(), &descs, &p, &bank, DEFAULT_FLOOR),
            Err(Error::EmptyQuery)
        );
        let bare = Document::new("x", vec![2], vec![], BTreeSet::new()).unwrap();
        assert!(matches!(
            query_doc_features(&[5], &bare, &descs, &p, &bank, DEFAULT_FLOOR),
            Err(Error::NoEntities(_))
        ));
        let (f, fell_back) = features_or_floor(&[5, 6], &bare, &descs, &p, &bank, DEFAULT_FLOOR);
        assert!(fell_back);
        assert!(f.iter().all(|&x| x == 2.0 * libm::log(DEFAULT_FLOOR)));
    }

    #[test]
    fn repeated_query_entity_doubles_features() {
        let p = ModelParams::init(8, 4, 3, 11, 1);
        let bank = KernelBank::default();
        let descs = DescriptionStore::new();
        let one = query_doc_features(&[5], &doc(), &descs, &p, &bank, DEFAULT_FLOOR).unwrap();
        let two = query_doc_features(&[5, 5], &doc(), &descs, &p, &bank, DEFAULT_FLOOR).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn folds_are_stable() {
        assert_eq!(fold_of("201", 5), fold_of("201", 5));
        assert!(fold_of("anything", 5) < 5);
    }
}
