//! Salience scoring, the pairwise hinge loss, its exact gradient and the
//! training loop.
//!
//! The salience of entity `e` in document `d` is `W_s · KIM(e, d) + b_s`.
//! Training minimises `Σ max(0, 1 - f(e⁺, d) + f(e⁻, d))` over (salient,
//! non-salient) pairs of the same document with Adam, evaluating dev
//! Precision@1 periodically and keeping the best checkpoint.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_salience_pairs, DescriptionStore, Document, SaliencePair, DEFAULT_MAX_PAIRS};
use crate::exec::{Executor, Sequential};
use crate::math::{axpy, dot};
use crate::model::{
    encode_entity, entity_backward, DocContext, EntityEncoding, KernelBank, KernelScores, ModelParams,
    SparseGrads, DEFAULT_DIM, DEFAULT_WINDOW,
};
use crate::optim::{AdamConfig, AdamState};
use crate::{Error, Result};

/// `W_s · (entity kernels ⊔ word kernels) + b_s`.
pub fn score_from_kernels(scores: &KernelScores, params: &ModelParams) -> f64 {
    let k = scores.entity_kernels.len();
    dot(&params.salience_weights[..k], &scores.entity_kernels)
        + dot(&params.salience_weights[k..], &scores.word_kernels)
        + params.salience_bias
}

pub fn score_entity(
    entity: usize,
    doc: &Document,
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
) -> f64 {
    let s = crate::model::kim(entity, doc, descriptions, params, bank);
    score_from_kernels(&s, params)
}

/// `max(0, 1 - score_pos + score_neg)`.
pub fn hinge_loss(score_pos: f64, score_neg: f64) -> f64 {
    (1.0 - score_pos + score_neg).max(0.0)
}

/// Distinct entities of `doc` ordered by descending salience; equal scores
/// are ordered by ascending entity index.
pub fn rank_entities(
    doc: &Document,
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
) -> Vec<(usize, f64)> {
    let ctx = DocContext::new(doc, descriptions, params);
    let mut ranked: Vec<(usize, f64)> = ctx
        .entities
        .iter()
        .map(|(enc, _)| (enc.entity, score_from_kernels(&ctx.kim(enc, params, bank), params)))
        .collect();
    sort_by_score(&mut ranked);
    ranked
}

/// Sorts `(entity, score)` by score descending, then entity ascending.
pub fn sort_by_score(ranked: &mut [(usize, f64)]) {
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Dense gradient tensors mirroring [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: Vec<f64>,
    pub conv: Vec<f64>,
    pub projection: Vec<f64>,
    pub salience_weights: Vec<f64>,
    pub salience_bias: f64,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            embeddings: vec![0.0; params.embeddings.len()],
            conv: vec![0.0; params.conv.len()],
            projection: vec![0.0; params.projection.len()],
            salience_weights: vec![0.0; params.salience_weights.len()],
            salience_bias: 0.0,
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.embeddings,
            &self.conv,
            &self.projection,
            &self.salience_weights,
            core::slice::from_ref(&self.salience_bias),
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&x| x == 0.0))
    }

    fn add_sparse(&mut self, s: &SparseGrads, dim: usize) {
        for (&r, g) in &s.rows {
            axpy(1.0, g, &mut self.embeddings[r * dim..(r + 1) * dim]);
        }
        axpy(1.0, &s.conv, &mut self.conv);
        axpy(1.0, &s.projection, &mut self.projection);
        axpy(1.0, &s.salience_weights, &mut self.salience_weights);
        self.salience_bias += s.salience_bias;
    }
}

/// Loss and sparse gradient of the pairs of one document.
fn document_gradients(
    doc: &Document,
    pairs: &[SaliencePair],
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
) -> (f64, SparseGrads) {
    let ctx = DocContext::new(doc, descriptions, params);
    let mut outside: BTreeMap<usize, EntityEncoding> = BTreeMap::new();
    let mut scores: BTreeMap<usize, (KernelScores, f64)> = BTreeMap::new();
    for p in pairs {
        for e in [p.positive, p.negative] {
            if scores.contains_key(&e) {
                continue;
            }
            let enc = match ctx.encoding(e) {
                Some(enc) => enc,
                None => outside
                    .entry(e)
                    .or_insert_with(|| encode_entity(e, descriptions, params)),
            };
            let s = ctx.kim(enc, params, bank);
            let f = score_from_kernels(&s, params);
            scores.insert(e, (s, f));
        }
    }

    // dL/df per entity; the hinge kink (margin exactly 1) counts as inactive.
    let mut loss = 0.0;
    let mut coef: BTreeMap<usize, f64> = BTreeMap::new();
    for p in pairs {
        let l = 1.0 - scores[&p.positive].1 + scores[&p.negative].1;
        if l > 0.0 {
            loss += l;
            *coef.entry(p.positive).or_default() -= 1.0;
            *coef.entry(p.negative).or_default() += 1.0;
        }
    }

    let mut grads = SparseGrads::new(params);
    let d = params.dim;
    let mut entity_grads = vec![vec![0.0; d]; ctx.entities.len()];
    let mut outside_grads: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&e, &c) in &coef {
        if c == 0.0 {
            continue;
        }
        let (s, _) = &scores[&e];
        axpy(c, &s.concat(), &mut grads.salience_weights);
        grads.salience_bias += c;

        let g_phi: Vec<f64> = params.salience_weights.iter().map(|w| c * w).collect();
        let mut target_grad = vec![0.0; d];
        let target = ctx.encoding(e).unwrap_or_else(|| &outside[&e]);
        ctx.kim_backward(target, &g_phi, params, bank, &mut target_grad, &mut entity_grads, &mut grads);
        match ctx.entities.iter().position(|(enc, _)| enc.entity == e) {
            Some(slot) => axpy(1.0, &target_grad, &mut entity_grads[slot]),
            None => axpy(1.0, &target_grad, outside_grads.entry(e).or_insert_with(|| vec![0.0; d])),
        }
    }
    for ((enc, _), g) in ctx.entities.iter().zip(&entity_grads) {
        if g.iter().any(|&x| x != 0.0) {
            entity_backward(enc, g, params, &mut grads);
        }
    }
    for (e, g) in &outside_grads {
        entity_backward(&outside[e], g, params, &mut grads);
    }
    (loss, grads)
}

/// Groups pairs by document, keeping first-appearance order.
fn group_by_doc(batch: &[SaliencePair]) -> Vec<(usize, Vec<SaliencePair>)> {
    let mut slots: BTreeMap<usize, usize> = BTreeMap::new();
    let mut groups: Vec<(usize, Vec<SaliencePair>)> = Vec::new();
    for p in batch {
        let slot = *slots.entry(p.doc).or_insert_with(|| {
            groups.push((p.doc, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(*p);
    }
    groups
}

/// Summed hinge loss of `batch` and its exact gradient. `pair.doc` indexes
/// into `docs`.
pub fn gradients(
    batch: &[SaliencePair],
    docs: &[Document],
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
) -> (f64, Gradients) {
    gradients_with(&Sequential, batch, docs, descriptions, params, bank)
}

/// [`gradients`] with per-document work spread over `exec`. Partial results
/// are reduced in a fixed order, so the output does not depend on `exec`.
pub fn gradients_with<E: Executor>(
    exec: &E,
    batch: &[SaliencePair],
    docs: &[Document],
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
) -> (f64, Gradients) {
    let groups = group_by_doc(batch);
    let parts = exec.map(groups.len(), |i| {
        let (doc, pairs) = &groups[i];
        document_gradients(&docs[*doc], pairs, descriptions, params, bank)
    });
    let mut total = Gradients::zeros_like(params);
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_sparse(g, params.dim);
    }
    (loss, total)
}

/// Summed hinge loss over `pairs` without gradients.
pub fn pair_loss<E: Executor>(
    exec: &E,
    pairs: &[SaliencePair],
    docs: &[Document],
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
) -> f64 {
    let groups = group_by_doc(pairs);
    exec.map(groups.len(), |i| {
        let (doc, pairs) = &groups[i];
        let ctx = DocContext::new(&docs[*doc], descriptions, params);
        let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
        let mut f = |e: usize| {
            *cache.entry(e).or_insert_with(|| {
                let enc = match ctx.encoding(e) {
                    Some(enc) => enc.clone(),
                    None => encode_entity(e, descriptions, params),
                };
                score_from_kernels(&ctx.kim(&enc, params, bank), params)
            })
        };
        pairs
            .iter()
            .map(|p| {
                let (fp, fn_) = (f(p.positive), f(p.negative));
                hinge_loss(fp, fn_)
            })
            .sum::<f64>()
    })
    .into_iter()
    .sum()
}

/// Mean Precision@1 of the salience ranking over documents that have at least
/// one salient entity; `None` if there are none.
pub fn precision_at_1<E: Executor>(
    exec: &E,
    docs: &[Document],
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
) -> Option<f64> {
    let labelled: Vec<&Document> = docs.iter().filter(|d| !d.salient.is_empty()).collect();
    if labelled.is_empty() {
        return None;
    }
    let hits = exec.map(labelled.len(), |i| {
        let doc = labelled[i];
        let ranked = rank_entities(doc, descriptions, params, bank);
        ranked.first().map_or(0.0, |(e, _)| f64::from(u8::from(doc.salient.contains(e))))
    });
    Some(hits.iter().sum::<f64>() / labelled.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Dev evaluations without improvement before stopping.
    pub patience: usize,
    /// Batches between dev evaluations; the dev set is also evaluated at the
    /// end of every epoch.
    pub eval_interval: usize,
    pub max_epochs: usize,
    pub max_pairs_per_doc: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            window: DEFAULT_WINDOW,
            batch_size: 64,
            lr: 1e-3,
            patience: 3,
            eval_interval: 1000,
            max_epochs: 10,
            max_pairs_per_doc: DEFAULT_MAX_PAIRS,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("lr must be a non-negative finite number");
        }
        if self.dim == 0 || self.window == 0 {
            return bad("dim and window must be positive");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevEvaluation {
    pub epoch: usize,
    /// Batches processed so far.
    pub batches: usize,
    pub precision_at_1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The checkpoint with the best dev Precision@1.
    pub params: ModelParams,
    pub history: Vec<DevEvaluation>,
    /// Mean pair loss at initialisation.
    pub initial_loss: f64,
    /// Mean pair loss after each completed epoch.
    pub epoch_losses: Vec<f64>,
    pub best: DevEvaluation,
}

/// Trains from `init` (or a seeded random initialisation) on the salience
/// pairs of `train`, keeping the parameters with the best dev Precision@1.
/// Evaluation happens before the first batch, every `eval_interval` batches
/// and at the end of each epoch; training stops after `patience` evaluations
/// without strict improvement or after `max_epochs`.
pub fn train_salience<E: Executor>(
    exec: &E,
    train: &[Document],
    dev: &[Document],
    descriptions: &DescriptionStore,
    vocab_size: usize,
    bank: &KernelBank,
    config: &TrainConfig,
    init: Option<ModelParams>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::InvalidArgument("train and dev sets must be non-empty".into()));
    }
    let mut params = match init {
        Some(p) => p,
        None => ModelParams::init(vocab_size, config.dim, config.window, bank.len(), config.seed),
    };
    params.validate()?;
    if params.n_kernels != bank.len() {
        return Err(Error::DimensionMismatch {
            expected: bank.len(),
            found: params.n_kernels,
        });
    }

    let pairs: Vec<SaliencePair> = train
        .iter()
        .enumerate()
        .flat_map(|(i, doc)| {
            let seed = config.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            make_salience_pairs(doc, i, seed, config.max_pairs_per_doc)
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoTrainingPairs("no document has both salient and non-salient entities".into()));
    }
    let mean_loss = |p: &ModelParams| pair_loss(exec, &pairs, train, descriptions, p, bank) / pairs.len() as f64;
    let evaluate = |p: &ModelParams| precision_at_1(exec, dev, descriptions, p, bank).ok_or(Error::NoDevLabels);

    let initial = DevEvaluation {
        epoch: 0,
        batches: 0,
        precision_at_1: evaluate(&params)?,
    };
    let initial_loss = mean_loss(&params);
    let mut best = initial;
    let mut best_params = params.clone();
    let mut history = vec![initial];
    let mut epoch_losses = Vec::new();
    let mut stale = 0;

    let mut adam = AdamState::new(
        &params,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order = pairs.clone();
    let mut batches = 0;

    'epochs: for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for (i, batch) in order.chunks(config.batch_size).enumerate() {
            let (_, grads) = gradients_with(exec, batch, train, descriptions, &params, bank);
            adam.step(&mut params, &grads)?;
            batches += 1;
            let last = (i + 1) * config.batch_size >= order.len();
            if batches % config.eval_interval == 0 || last {
                let eval = DevEvaluation {
                    epoch,
                    batches,
                    precision_at_1: evaluate(&params)?,
                };
                history.push(eval);
                if eval.precision_at_1 > best.precision_at_1 {
                    best = eval;
                    best_params = params.clone();
                    stale = 0;
                } else {
                    stale += 1;
                }
                if last {
                    epoch_losses.push(mean_loss(&params));
                }
                if stale >= config.patience.max(1) {
                    break 'epochs;
                }
            }
        }
    }
    best_params.validate()?;
    Ok(TrainOutcome {
        params: best_params,
        history,
        initial_loss,
        epoch_losses,
        best,
    })
}
