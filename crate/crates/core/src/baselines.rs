//! Frequency, PageRank and feature-based salience baselines, and the linear
//! pairwise ranker shared with document ranking.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{DescriptionStore, Document};
use crate::exec::Executor;
use crate::math::{dot, norm};
use crate::model::{cosine, DocContext, ModelParams};
use crate::{Error, Result};

/// Salience as raw mention count.
pub fn frequency_scores(doc: &Document) -> BTreeMap<usize, f64> {
    doc.entity_counts()
        .into_iter()
        .map(|(e, n)| (e, n as f64))
        .collect()
}

/// One step of a random walk over the document's entities mixed with the
/// normalised frequency distribution:
/// `score = (1 - alpha) · p + alpha · Aᵀp`, where `A[i][j]` is the positive
/// part of the KEE cosine between entities `i ≠ j`, row-normalised (an
/// all-zero row becomes uniform over the other entities, or a self-loop when
/// there are none).
pub fn pagerank_scores(
    doc: &Document,
    descriptions: &DescriptionStore,
    params: &ModelParams,
    alpha: f64,
) -> Result<BTreeMap<usize, f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    let ctx = DocContext::new(doc, descriptions, params);
    let n = ctx.entities.len();
    if n == 0 {
        return Err(Error::NoEntities(doc.doc_id.clone()));
    }
    let total = ctx.total_mentions as f64;
    let p: Vec<f64> = ctx.entities.iter().map(|(_, c)| *c as f64 / total).collect();

    let mut walk = vec![0.0; n];
    for i in 0..n {
        let mut row: Vec<f64> = (0..n)
            .map(|j| {
                if i == j {
                    0.0
                } else {
                    cosine(&ctx.entities[i].0.vector, &ctx.entities[j].0.vector)
                        .unwrap_or(0.0)
                        .max(0.0)
                }
            })
            .collect();
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|a| *a /= sum);
        } else if n == 1 {
            row[0] = 1.0;
        } else {
            for (j, a) in row.iter_mut().enumerate() {
                *a = if j == i { 0.0 } else { 1.0 / (n - 1) as f64 };
            }
        }
        for j in 0..n {
            walk[j] += p[i] * row[j];
        }
    }
    Ok(ctx
        .entities
        .iter()
        .enumerate()
        .map(|(i, (enc, _))| (enc.entity, (1.0 - alpha) * p[i] + alpha * walk[i]))
        .collect())
}

/// Picks the alpha in {0, 0.1, …, 1} with the best mean Precision@1 on
/// `docs`; the smallest alpha wins ties.
pub fn fit_pagerank_alpha<E: Executor>(
    exec: &E,
    docs: &[Document],
    descriptions: &DescriptionStore,
    params: &ModelParams,
) -> Result<f64> {
    let labelled: Vec<&Document> = docs
        .iter()
        .filter(|d| !d.salient.is_empty())
        .collect();
    if labelled.is_empty() {
        return Err(Error::NoDevLabels);
    }
    let mut best = (0.0, f64::NEG_INFINITY);
    for step in 0..=10 {
        let alpha = step as f64 / 10.0;
        let hits = exec.map(labelled.len(), |i| {
            let doc = labelled[i];
            pagerank_scores(doc, descriptions, params, alpha)
                .map(|s| match rank_scores(&s).first() {
                    Some((e, _)) if doc.salient.contains(e) => 1.0,
                    _ => 0.0,
                })
        });
        let mut sum = 0.0;
        for h in hits {
            sum += h?;
        }
        let p1 = sum / labelled.len() as f64;
        if p1 > best.1 {
            best = (alpha, p1);
        }
    }
    Ok(best.0)
}

/// Orders an entity → score map by score descending, then entity index.
pub fn rank_scores(scores: &BTreeMap<usize, f64>) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = scores.iter().map(|(&e, &s)| (e, s)).collect();
    crate::salience::sort_by_score(&mut v);
    v
}

pub const LETOR_FEATURES: [&str; 3] = ["frequency", "first_location", "embedding_vote"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityFeatureVector {
    /// Mention count.
    pub frequency: f64,
    /// First mention position divided by the document length.
    pub first_location: f64,
    /// `Σ frequency(e′) · cos(V[e], V[e′])` over the other distinct entities.
    pub embedding_vote: f64,
}

impl EntityFeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.frequency, self.first_location, self.embedding_vote]
    }
}

pub fn letor_features(doc: &Document, params: &ModelParams) -> BTreeMap<usize, EntityFeatureVector> {
    let counts = doc.entity_counts();
    let mut first: BTreeMap<usize, usize> = BTreeMap::new();
    for m in &doc.mentions {
        let f = first.entry(m.entity).or_insert(m.position);
        *f = (*f).min(m.position);
    }
    let len = doc.words.len().max(1) as f64;
    let norms: BTreeMap<usize, f64> = counts.keys().map(|&e| (e, norm(params.row(e)))).collect();
    counts
        .iter()
        .map(|(&e, &n)| {
            let vote = counts
                .iter()
                .filter(|(&o, _)| o != e)
                .map(|(&o, &m)| {
                    let (a, b) = (norms[&e], norms[&o]);
                    let c = if a < crate::model::ZERO_NORM || b < crate::model::ZERO_NORM {
                        0.0
                    } else {
                        (dot(params.row(e), params.row(o)) / (a * b)).clamp(-1.0, 1.0)
                    };
                    m as f64 * c
                })
                .sum();
            let fv = EntityFeatureVector {
                frequency: n as f64,
                first_location: first[&e] as f64 / len,
                embedding_vote: vote,
            };
            (e, fv)
        })
        .collect()
}

/// (salient, non-salient) feature-vector pairs for training the LeToR
/// baseline.
pub fn letor_pairs(docs: &[Document], params: &ModelParams) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for doc in docs {
        let feats = letor_features(doc, params);
        for pos in &doc.salient {
            for neg in doc.non_salient_entities() {
                out.push((feats[pos].to_vec(), feats[&neg].to_vec()));
            }
        }
    }
    out
}

/// Linear model over named, z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRankerParams {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    /// Standard deviations; a (near) constant feature gets scale 1.
    pub scales: Vec<f64>,
}

impl LinearRankerParams {
    pub fn zeros(feature_names: Vec<String>) -> Self {
        let n = feature_names.len();
        Self {
            feature_names,
            weights: vec![0.0; n],
            means: vec![0.0; n],
            scales: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    /// `w · standardized(x)` for a vector in `feature_names` order.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.weights, &self.standardize(x)?))
    }
}

/// Scores named features; every model feature must be present exactly once.
pub fn linear_score(params: &LinearRankerParams, features: &[(&str, f64)]) -> Result<f64> {
    let mut x = vec![None; params.dim()];
    for (name, v) in features {
        let i = params
            .feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature `{name}`")))?;
        x[i] = Some(*v);
    }
    let x: Vec<f64> = x
        .into_iter()
        .zip(&params.feature_names)
        .map(|(v, n)| v.ok_or_else(|| Error::InvalidArgument(format!("missing feature `{n}`"))))
        .collect::<Result<_>>()?;
    params.score(&x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearTrainConfig {
    pub lambda: f64,
    /// Initial step; step `t` uses `lr / √t`.
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LinearTrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            lr: 0.01,
            epochs: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub params: LinearRankerParams,
    /// Best objective value seen after each epoch (non-increasing).
    pub objectives: Vec<f64>,
}

/// Minimises `Σ max(0, 1 - w·x⁺ + w·x⁻) + λ‖w‖²` over z-scored features by
/// full-batch subgradient descent with step `lr/√t`. The regulariser is
/// applied as a proximal step so any λ is stable. Returns the best iterate.
pub fn train_linear_pairwise(
    examples: &[(Vec<f64>, Vec<f64>)],
    feature_names: Vec<String>,
    config: &LinearTrainConfig,
) -> Result<LinearFit> {
    if examples.is_empty() {
        return Err(Error::NoTrainingPairs("empty pair list".to_string()));
    }
    if !(config.lambda >= 0.0) || !(config.lr > 0.0) {
        return Err(Error::InvalidArgument("lambda must be >= 0 and lr > 0".into()));
    }
    let dim = feature_names.len();
    for (a, b) in examples {
        for x in [a, b] {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
        }
    }

    let mut params = LinearRankerParams::zeros(feature_names);
    let count = 2.0 * examples.len() as f64;
    for i in 0..dim {
        let mean = examples.iter().map(|(a, b)| a[i] + b[i]).sum::<f64>() / count;
        let var = examples
            .iter()
            .map(|(a, b)| (a[i] - mean) * (a[i] - mean) + (b[i] - mean) * (b[i] - mean))
            .sum::<f64>()
            / count;
        let sd = libm::sqrt(var);
        params.means[i] = mean;
        params.scales[i] = if sd > 1e-12 { sd } else { 1.0 };
    }
    let diffs: Vec<Vec<f64>> = examples
        .iter()
        .map(|(a, b)| (0..dim).map(|i| (a[i] - b[i]) / params.scales[i]).collect())
        .collect();

    let objective = |w: &[f64]| -> f64 {
        let hinge: f64 = diffs.iter().map(|d| (1.0 - dot(w, d)).max(0.0)).sum();
        hinge + config.lambda * dot(w, w)
    };

    let mut w = vec![0.0; dim];
    let mut best_w = w.clone();
    let mut best = objective(&w);
    let mut objectives = Vec::with_capacity(config.epochs);
    for t in 1..=config.epochs {
        let eta = config.lr / libm::sqrt(t as f64);
        let mut g = vec![0.0; dim];
        for d in &diffs {
            if 1.0 - dot(&w, d) > 0.0 {
                for (gi, di) in g.iter_mut().zip(d) {
                    *gi -= di;
                }
            }
        }
        let shrink = 1.0 / (1.0 + 2.0 * eta * config.lambda);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi = (*wi - eta * gi) * shrink;
        }
        let obj = objective(&w);
        if obj < best {
            best = obj;
            best_w.clone_from(&w);
        }
        objectives.push(best);
    }
    params.weights = best_w;
    Ok(LinearFit { params, objectives })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Mention;
    use alloc::collections::BTreeSet;

    fn doc(mentions: &[(usize, usize)], len: usize) -> Document {
        Document::new(
            "d",
            vec![0; len],
            mentions
                .iter()
                .map(|&(entity, position)| Mention { entity, position })
                .collect(),
            BTreeSet::new(),
        )
        .unwrap()
    }

    fn names() -> Vec<String> {
        LETOR_FEATURES.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn frequency_counts() {
        let d = doc(&[(3, 0), (3, 1), (4, 2), (3, 3)], 5);
        let f = frequency_scores(&d);
        assert_eq!(f[&3], 3.0);
        assert_eq!(f[&4], 1.0);
        assert_eq!(rank_scores(&f)[0].0, 3);
        assert!(frequency_scores(&doc(&[], 0)).is_empty());
        let even = frequency_scores(&doc(&[(7, 0), (5, 1)], 2));
        assert_eq!(rank_scores(&even).iter().map(|r| r.0).collect::<Vec<_>>(), vec![5, 7]);
    }

    #[test]
    fn pagerank_edge_cases() {
        let p = ModelParams::init(10, 4, 3, 11, 9);
        let descs = DescriptionStore::new();
        let single = doc(&[(5, 0), (5, 1)], 2);
        for alpha in [0.0, 0.3, 1.0] {
            let s = pagerank_scores(&single, &descs, &p, alpha).unwrap();
            assert!((s[&5] - 1.0).abs() < 1e-15);
        }
        let d = doc(&[(5, 0), (6, 1), (6, 2), (7, 3)], 4);
        let s = pagerank_scores(&d, &descs, &p, 0.0).unwrap();
        assert_eq!(s[&6], 0.5);
        assert_eq!(s[&5], 0.25);
        let s = pagerank_scores(&d, &descs, &p, 0.7).unwrap();
        assert!((s.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pagerank_scores(&doc(&[], 1), &descs, &p, 0.5).is_err());
        assert!(pagerank_scores(&d, &descs, &p, 1.5).is_err());
    }

    #[test]
    fn pagerank_symmetric_entities_tie() {
        let mut p = ModelParams::init(10, 4, 3, 11, 9);
        let row = p.row(5).to_vec();
        p.row_mut(6).copy_from_slice(&row);
        let d = doc(&[(5, 0), (6, 1), (7, 2)], 3);
        let s = pagerank_scores(&d, &DescriptionStore::new(), &p, 0.6).unwrap();
        assert!((s[&5] - s[&6]).abs() < 1e-15);
    }

    #[test]
    fn letor_feature_values() {
        let mut p = ModelParams::zeros(10, 2, 3, 11);
        p.row_mut(5).copy_from_slice(&[1.0, 0.0]);
        p.row_mut(6).copy_from_slice(&[0.0, 1.0]);
        let d = doc(&[(5, 0), (6, 4), (5, 7)], 10);
        let f = letor_features(&d, &p);
        assert_eq!(f[&5].first_location, 0.0);
        assert_eq!(f[&6].first_location, 0.4);
        assert_eq!(f[&5].frequency, 2.0);
        assert_eq!(f[&5].embedding_vote, 0.0);
        assert_eq!(f[&6].embedding_vote, 0.0);
        let single = letor_features(&doc(&[(5, 3)], 10), &p);
        assert_eq!(single[&5].embedding_vote, 0.0);
    }

    #[test]
    fn separable_pairs_are_ordered() {
        let ex: Vec<(Vec<f64>, Vec<f64>)> = (0..12)
            .map(|i| {
                let noise = (i as f64 * 0.37).sin();
                (vec![3.0 + noise, noise, 1.0], vec![noise, -noise, 1.0])
            })
            .collect();
        let fit = train_linear_pairwise(&ex, names(), &LinearTrainConfig::default()).unwrap();
        for (a, b) in &ex {
            assert!(fit.params.score(a).unwrap() > fit.params.score(b).unwrap());
        }
        let w = &fit.params.weights;
        let hinge = *fit.objectives.last().unwrap() - 1e-4 * dot(w, w);
        assert!(hinge.abs() < 1e-9, "hinge part {hinge}");
        assert!(fit.objectives.windows(2).all(|p| p[1] <= p[0]));
        assert_eq!(w[2], 0.0, "constant feature must carry no weight");
    }

    #[test]
    fn identical_pair_is_a_tie() {
        let ex = vec![(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0])];
        let fit = train_linear_pairwise(&ex, names(), &LinearTrainConfig::default()).unwrap();
        assert!(*fit.objectives.last().unwrap() >= 1.0);
        let s = fit.params.score(&ex[0].0).unwrap();
        assert_eq!(s, fit.params.score(&ex[0].1).unwrap());
    }

    #[test]
    fn heavy_regularisation_shrinks_weights() {
        let ex = vec![(vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0])];
        let cfg = LinearTrainConfig { lambda: 1e9, ..LinearTrainConfig::default() };
        let fit = train_linear_pairwise(&ex, names(), &cfg).unwrap();
        assert!(fit.params.weights.iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let ex = vec![(vec![1.0], vec![0.0, 1.0, 2.0])];
        assert!(matches!(
            train_linear_pairwise(&ex, names(), &LinearTrainConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn linear_score_by_name() {
        let mut p = LinearRankerParams::zeros(names());
        assert_eq!(linear_score(&p, &[("frequency", 3.0), ("first_location", 0.1), ("embedding_vote", 0.0)]).unwrap(), 0.0);
        p.weights[0] = 1.0;
        let a = linear_score(&p, &[("frequency", 3.0), ("first_location", 0.1), ("embedding_vote", 0.0)]).unwrap();
        let b = linear_score(&p, &[("frequency", 1.0), ("first_location", 0.1), ("embedding_vote", 0.0)]).unwrap();
        assert!(a > b);
        assert!(linear_score(&p, &[("bogus", 1.0)]).is_err());
        assert!(linear_score(&p, &[("frequency", 1.0)]).is_err());
    }
}
