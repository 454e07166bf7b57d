//! Seeded generator of small labelled salience corpora.
//!
//! Every document has a main topic. Its salient entities are entities of
//! that topic, mentioned alongside each other and surrounded by the topic's
//! words. Distractor entities come from other topics, and a global stop
//! entity is mentioned in every document more often than any topical entity,
//! so raw frequency ranks a non-salient entity first.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawDescription, RawDocument, RawMention};
use crate::{Error, Result};

pub const STOP_ENTITY: &str = "STOP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub topics: usize,
    pub entities_per_topic: usize,
    pub words_per_topic: usize,
    pub filler_words: usize,
    pub train_docs: usize,
    pub dev_docs: usize,
    pub test_docs: usize,
    pub min_doc_len: usize,
    pub max_doc_len: usize,
    pub salient_per_doc: usize,
    pub distractors_per_doc: usize,
    /// Fraction of tokens drawn from the main topic's words.
    pub topic_word_share: f64,
    /// Fraction of tokens drawn from the distractors' topics.
    pub distractor_word_share: f64,
    pub description_words: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            topics: 5,
            entities_per_topic: 20,
            words_per_topic: 30,
            filler_words: 50,
            train_docs: 200,
            dev_docs: 200,
            test_docs: 200,
            min_doc_len: 40,
            max_doc_len: 80,
            salient_per_doc: 2,
            distractors_per_doc: 3,
            topic_word_share: 0.5,
            distractor_word_share: 0.1,
            description_words: 25,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.topics == 0 {
            return bad("at least one topic is required".into());
        }
        if self.salient_per_doc == 0 || self.salient_per_doc > self.entities_per_topic {
            return bad(format!(
                "salient_per_doc must be in 1..={}",
                self.entities_per_topic
            ));
        }
        if self.distractors_per_doc > 0 && self.topics < 2 {
            return bad("distractors need at least two topics".into());
        }
        if self.words_per_topic == 0 || self.filler_words == 0 {
            return bad("word pools must be non-empty".into());
        }
        if self.min_doc_len == 0 || self.min_doc_len > self.max_doc_len {
            return bad("document length range must be non-empty and start at 1 or more".into());
        }
        let shares = self.topic_word_share + self.distractor_word_share;
        if !(self.topic_word_share >= 0.0 && self.distractor_word_share >= 0.0 && shares <= 1.0) {
            return bad("word shares must be non-negative and sum to at most 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub train: Vec<RawDocument>,
    pub dev: Vec<RawDocument>,
    pub test: Vec<RawDocument>,
    pub descriptions: Vec<RawDescription>,
}

fn entity_name(topic: usize, i: usize) -> String {
    format!("T{topic}_E{i:02}")
}

fn topic_word(topic: usize, i: usize) -> String {
    format!("t{topic}w{i:02}")
}

fn filler_word(i: usize) -> String {
    format!("f{i:02}")
}

/// Generates train/dev/test splits and entity descriptions; identical
/// `(spec, seed)` always give identical output.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut descriptions = Vec::new();
    for t in 0..spec.topics {
        for i in 0..spec.entities_per_topic {
            let words = (0..spec.description_words)
                .map(|_| topic_word(t, rng.gen_range(0..spec.words_per_topic)))
                .collect();
            descriptions.push(RawDescription {
                entity_id: entity_name(t, i),
                words,
            });
        }
    }
    descriptions.push(RawDescription {
        entity_id: STOP_ENTITY.into(),
        words: (0..spec.description_words)
            .map(|_| filler_word(rng.gen_range(0..spec.filler_words)))
            .collect(),
    });

    let split = |name: &str, n: usize, rng: &mut ChaCha8Rng| -> Vec<RawDocument> {
        (0..n)
            .map(|i| generate_document(spec, format!("{name}-{i:04}"), rng))
            .collect()
    };
    let train = split("train", spec.train_docs, &mut rng);
    let dev = split("dev", spec.dev_docs, &mut rng);
    let test = split("test", spec.test_docs, &mut rng);
    Ok(SyntheticCorpus {
        train,
        dev,
        test,
        descriptions,
    })
}

fn generate_document(spec: &SyntheticSpec, doc_id: String, rng: &mut ChaCha8Rng) -> RawDocument {
    let topic = rng.gen_range(0..spec.topics);
    let mut members: Vec<usize> = (0..spec.entities_per_topic).collect();
    members.shuffle(rng);
    let salient: Vec<String> = members[..spec.salient_per_doc]
        .iter()
        .map(|&i| entity_name(topic, i))
        .collect();

    let mut other_topics: Vec<usize> = (0..spec.topics).filter(|&t| t != topic).collect();
    other_topics.shuffle(rng);
    let distractor_topics: Vec<usize> = (0..spec.distractors_per_doc)
        .map(|i| other_topics[i % other_topics.len()])
        .collect();
    let mut distractors: Vec<String> = Vec::new();
    for &t in &distractor_topics {
        loop {
            let name = entity_name(t, rng.gen_range(0..spec.entities_per_topic));
            if !distractors.contains(&name) {
                distractors.push(name);
                break;
            }
        }
    }

    let len = rng.gen_range(spec.min_doc_len..=spec.max_doc_len);
    let words: Vec<String> = (0..len)
        .map(|_| {
            let u: f64 = rng.gen();
            if u < spec.topic_word_share {
                topic_word(topic, rng.gen_range(0..spec.words_per_topic))
            } else if u < spec.topic_word_share + spec.distractor_word_share && !distractor_topics.is_empty() {
                let t = distractor_topics[rng.gen_range(0..distractor_topics.len())];
                topic_word(t, rng.gen_range(0..spec.words_per_topic))
            } else {
                filler_word(rng.gen_range(0..spec.filler_words))
            }
        })
        .collect();

    let positions = |n: usize, rng: &mut ChaCha8Rng| -> Vec<i64> {
        let mut p: Vec<i64> = (0..n).map(|_| rng.gen_range(0..len) as i64).collect();
        p.sort_unstable();
        p
    };
    let mut entities = Vec::new();
    let mut max_topical = 0;
    for id in &salient {
        let n = rng.gen_range(2..=3);
        max_topical = max_topical.max(n);
        entities.push(RawMention {
            id: id.clone(),
            positions: positions(n, rng),
        });
    }
    for id in &distractors {
        let n = rng.gen_range(1..=3);
        max_topical = max_topical.max(n);
        entities.push(RawMention {
            id: id.clone(),
            positions: positions(n, rng),
        });
    }
    let stop = max_topical + rng.gen_range(1..=3);
    entities.push(RawMention {
        id: STOP_ENTITY.into(),
        positions: positions(stop, rng),
    });
    entities.shuffle(rng);

    RawDocument {
        doc_id,
        words,
        entities,
        salient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::encode_document;
    use crate::vocab::build_vocabulary;

    #[test]
    fn single_topic_document() {
        let spec = SyntheticSpec {
            topics: 1,
            train_docs: 1,
            dev_docs: 0,
            test_docs: 0,
            distractors_per_doc: 0,
            salient_per_doc: 1,
            ..SyntheticSpec::default()
        };
        let c = generate_synthetic_corpus(&spec, 3).unwrap();
        let doc = &c.train[0];
        let count = |id: &str| doc.entities.iter().find(|m| m.id == id).unwrap().positions.len();
        let stop = count(STOP_ENTITY);
        assert!(doc.entities.iter().filter(|m| m.id != STOP_ENTITY).all(|m| m.positions.len() < stop));
        assert_eq!(doc.salient.len(), 1);
        assert_ne!(doc.salient[0], STOP_ENTITY);
        assert!(doc.salient[0].starts_with("T0_"));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            train_docs: 20,
            dev_docs: 5,
            test_docs: 5,
            ..SyntheticSpec::default()
        };
        assert_eq!(
            generate_synthetic_corpus(&spec, 11).unwrap(),
            generate_synthetic_corpus(&spec, 11).unwrap()
        );
        assert_ne!(
            generate_synthetic_corpus(&spec, 11).unwrap(),
            generate_synthetic_corpus(&spec, 12).unwrap()
        );
    }

    #[test]
    fn inconsistent_specs_are_rejected() {
        for spec in [
            SyntheticSpec { topics: 0, ..SyntheticSpec::default() },
            SyntheticSpec { topics: 1, ..SyntheticSpec::default() },
            SyntheticSpec { min_doc_len: 10, max_doc_len: 5, ..SyntheticSpec::default() },
            SyntheticSpec { salient_per_doc: 0, ..SyntheticSpec::default() },
        ] {
            assert!(generate_synthetic_corpus(&spec, 0).is_err());
        }
    }

    #[test]
    fn documents_are_valid_and_labels_topical() {
        let spec = SyntheticSpec { train_docs: 30, dev_docs: 0, test_docs: 0, ..SyntheticSpec::default() };
        let c = generate_synthetic_corpus(&spec, 5).unwrap();
        let vocab = build_vocabulary(&c.train, 1).unwrap();
        for raw in &c.train {
            let (doc, report) = encode_document(raw, &vocab).unwrap();
            assert_eq!(report.dropped_salient, 0);
            assert_eq!(doc.salient.len(), 2);
            assert!(!raw.salient.iter().any(|s| s == STOP_ENTITY));
            let topic = &raw.salient[0][..3];
            assert!(raw.salient.iter().all(|s| s.starts_with(topic)));
        }
    }
}
