//! Analytic salience gradients against central finite differences.

use std::collections::BTreeSet;

use kesm_core::corpus::{DescriptionStore, Document, Mention, SaliencePair};
use kesm_core::model::{KernelBank, ModelParams};
use kesm_core::salience::{gradients, hinge_loss, score_entity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: usize = 50;
const FIRST_ENTITY: usize = 30;

struct Instance {
    docs: Vec<Document>,
    descriptions: DescriptionStore,
    params: ModelParams,
    batch: Vec<SaliencePair>,
}

fn random_instance(seed: u64, dim: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bank = KernelBank::default();
    let mut params = ModelParams::init(VOCAB, dim, 3, bank.len(), seed);
    for x in params.embeddings.iter_mut() {
        *x = rng.gen_range(-1.0..1.0);
    }
    for x in params.salience_weights.iter_mut() {
        *x = rng.gen_range(-1.0..1.0);
    }
    params.salience_bias = rng.gen_range(-1.0..1.0);

    let mut descriptions = DescriptionStore::new();
    for e in FIRST_ENTITY..VOCAB {
        if rng.gen_bool(0.7) {
            let len = rng.gen_range(0..25);
            descriptions.insert(e, (0..len).map(|_| rng.gen_range(0..FIRST_ENTITY)).collect());
        }
    }

    let mut docs = Vec::new();
    let mut batch = Vec::new();
    for d in 0..2 {
        let n_words = rng.gen_range(4..15);
        let words: Vec<usize> = (0..n_words).map(|_| rng.gen_range(0..FIRST_ENTITY)).collect();
        let mut ents: Vec<usize> = (FIRST_ENTITY..VOCAB).collect();
        let n_ent = rng.gen_range(2..6);
        for i in 0..n_ent {
            let j = rng.gen_range(i..ents.len());
            ents.swap(i, j);
        }
        ents.truncate(n_ent);
        let mut mentions = Vec::new();
        for &e in &ents {
            for _ in 0..rng.gen_range(1..4) {
                mentions.push(Mention {
                    entity: e,
                    position: rng.gen_range(0..n_words),
                });
            }
        }
        let salient: BTreeSet<usize> = [ents[0]].into();
        docs.push(Document::new(format!("d{d}"), words, mentions, salient).unwrap());
        batch.push(SaliencePair {
            doc: d,
            positive: ents[0],
            negative: ents[1],
        });
    }
    Instance {
        docs,
        descriptions,
        params,
        batch,
    }
}

fn loss(inst: &Instance, params: &ModelParams, bank: &KernelBank) -> f64 {
    inst.batch
        .iter()
        .map(|p| {
            let doc = &inst.docs[p.doc];
            hinge_loss(
                score_entity(p.positive, doc, &inst.descriptions, params, bank),
                score_entity(p.negative, doc, &inst.descriptions, params, bank),
            )
        })
        .sum()
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let bank = KernelBank::default();
    let step = 1e-4;
    let mut checked = 0;
    for seed in 0..8 {
        let inst = random_instance(seed, 8);
        let (l, grads) = gradients(&inst.batch, &inst.docs, &inst.descriptions, &inst.params, &bank);
        assert!((l - loss(&inst, &inst.params, &bank)).abs() < 1e-9);
        let analytic = grads.tensors();
        let names = ["V", "W_c", "W_p", "W_s", "b_s"];
        for t in 0..5 {
            for i in 0..analytic[t].len() {
                let mut plus = inst.params.clone();
                plus.tensors_mut()[t][i] += step;
                let mut minus = inst.params.clone();
                minus.tensors_mut()[t][i] -= step;
                let numeric = (loss(&inst, &plus, &bank) - loss(&inst, &minus, &bank)) / (2.0 * step);
                let a = analytic[t][i];
                let abs = (a - numeric).abs();
                let rel = abs / a.abs().max(numeric.abs());
                assert!(
                    abs < 1e-7 || rel < 1e-4,
                    "seed {seed} {}[{i}]: analytic {a} numeric {numeric}",
                    names[t]
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}
