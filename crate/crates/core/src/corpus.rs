//! Documents, entity descriptions and salience training pairs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::vocab::Vocabulary;
use crate::{Error, Result};

/// Maximum number of description words kept per entity.
pub const DESCRIPTION_WORDS: usize = 20;

/// Default cap on salience pairs drawn from one document.
pub const DEFAULT_MAX_PAIRS: usize = 256;

/// One pre-tokenised input document, as it appears in a JSON Lines file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub words: Vec<String>,
    #[serde(default)]
    pub entities: Vec<RawMention>,
    #[serde(default)]
    pub salient: Vec<String>,
}

/// An entity together with every token position it is mentioned at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMention {
    pub id: String,
    pub positions: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDescription {
    pub entity_id: String,
    pub words: Vec<String>,
}

impl RawDocument {
    fn malformed(&self, field: String, reason: impl Into<String>) -> Error {
        Error::MalformedRecord {
            doc_id: self.doc_id.clone(),
            field,
            reason: reason.into(),
        }
    }

    /// Checks the structural constraints every loader relies on.
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(self.malformed("doc_id".into(), "empty document id"));
        }
        let n = self.words.len() as i64;
        for (i, m) in self.entities.iter().enumerate() {
            if m.id.is_empty() {
                return Err(self.malformed(format!("entities[{i}].id"), "empty entity id"));
            }
            for &p in &m.positions {
                if p < 0 || p >= n {
                    return Err(self.malformed(
                        format!("entities[{i}].positions"),
                        format!("position {p} outside 0..{n}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub entity: usize,
    pub position: usize,
}

/// An encoded document: the token multiset, the mention multiset and the
/// salient entity labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub words: Vec<usize>,
    pub mentions: Vec<Mention>,
    pub salient: BTreeSet<usize>,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        words: Vec<usize>,
        mentions: Vec<Mention>,
        salient: BTreeSet<usize>,
    ) -> Result<Self> {
        let doc = Self {
            doc_id: doc_id.into(),
            words,
            mentions,
            salient,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, reason: String| Error::MalformedRecord {
            doc_id: self.doc_id.clone(),
            field: field.to_string(),
            reason,
        };
        if let Some(m) = self.mentions.iter().find(|m| m.position >= self.words.len()) {
            return Err(err(
                "mentions",
                format!("position {} outside 0..{}", m.position, self.words.len()),
            ));
        }
        let mentioned: BTreeSet<usize> = self.mentions.iter().map(|m| m.entity).collect();
        if let Some(e) = self.salient.iter().find(|e| !mentioned.contains(e)) {
            return Err(err("salient", format!("salient entity {e} is never mentioned")));
        }
        Ok(())
    }

    /// Distinct mentioned entities in ascending index order.
    pub fn distinct_entities(&self) -> Vec<usize> {
        self.entity_counts().into_keys().collect()
    }

    /// Mention count per distinct entity.
    pub fn entity_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for m in &self.mentions {
            *counts.entry(m.entity).or_default() += 1;
        }
        counts
    }

    /// Occurrence count per distinct word index.
    pub fn word_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for &w in &self.words {
            *counts.entry(w).or_default() += 1;
        }
        counts
    }

    pub fn mention_count(&self, entity: usize) -> usize {
        self.mentions.iter().filter(|m| m.entity == entity).count()
    }

    pub fn non_salient_entities(&self) -> Vec<usize> {
        self.distinct_entities()
            .into_iter()
            .filter(|e| !self.salient.contains(e))
            .collect()
    }
}

/// Side information from [`encode_document`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeReport {
    /// Salient labels dropped because the entity is never mentioned.
    pub dropped_salient: usize,
}

/// Maps every string of `raw` through `vocab`; unseen symbols become Unk.
pub fn encode_document(raw: &RawDocument, vocab: &Vocabulary) -> Result<(Document, EncodeReport)> {
    raw.validate()?;
    let words = raw.words.iter().map(|w| vocab.word(w)).collect();
    let mut mentions = Vec::new();
    let mut mentioned_ids = BTreeSet::new();
    for m in &raw.entities {
        let entity = vocab.entity(&m.id);
        if !m.positions.is_empty() {
            mentioned_ids.insert(m.id.as_str());
        }
        mentions.extend(m.positions.iter().map(|&p| Mention {
            entity,
            position: p as usize,
        }));
    }
    let mut report = EncodeReport::default();
    let mut salient = BTreeSet::new();
    for s in &raw.salient {
        if mentioned_ids.contains(s.as_str()) {
            salient.insert(vocab.entity(s));
        } else {
            report.dropped_salient += 1;
        }
    }
    let doc = Document {
        doc_id: raw.doc_id.clone(),
        words,
        mentions,
        salient,
    };
    Ok((doc, report))
}

/// Truncated, encoded entity descriptions keyed by entity index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionStore {
    entries: BTreeMap<usize, Vec<usize>>,
}

impl DescriptionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `words`, truncated to [`DESCRIPTION_WORDS`].
    pub fn insert(&mut self, entity: usize, mut words: Vec<usize>) -> Option<Vec<usize>> {
        words.truncate(DESCRIPTION_WORDS);
        self.entries.insert(entity, words)
    }

    /// `None` when the entity has no description; `Some(&[])` when it has an
    /// empty one.
    pub fn get(&self, entity: usize) -> Option<&[usize]> {
        self.entries.get(&entity).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.entries.iter().map(|(&e, w)| (e, w.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DescriptionReport {
    pub loaded: usize,
    /// Records whose entity is not in the vocabulary.
    pub skipped: usize,
    /// Records that replaced an earlier record for the same entity.
    pub duplicates: usize,
}

pub fn load_descriptions<I>(
    records: I,
    vocab: &Vocabulary,
    max_words: usize,
) -> Result<(DescriptionStore, DescriptionReport)>
where
    I: IntoIterator<Item = RawDescription>,
{
    if max_words == 0 {
        return Err(Error::InvalidArgument("max_words must be at least 1".into()));
    }
    let mut store = DescriptionStore::new();
    let mut report = DescriptionReport::default();
    for rec in records {
        let Some(entity) = vocab.lookup_entity(&rec.entity_id) else {
            report.skipped += 1;
            continue;
        };
        let limit = max_words.min(DESCRIPTION_WORDS);
        let words = rec.words.iter().take(limit).map(|w| vocab.word(w)).collect();
        if store.insert(entity, words).is_some() {
            report.duplicates += 1;
        } else {
            report.loaded += 1;
        }
    }
    Ok((store, report))
}

/// A (salient, non-salient) entity pair from one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SaliencePair {
    /// Index of the document within the training set.
    pub doc: usize,
    pub positive: usize,
    pub negative: usize,
}

/// All (salient × non-salient) pairs of `doc`, or a seeded uniform sample of
/// `max_pairs` of them when the cross product is larger. Pairs come out in
/// (positive, negative) order.
pub fn make_salience_pairs(
    doc: &Document,
    doc_index: usize,
    seed: u64,
    max_pairs: usize,
) -> Vec<SaliencePair> {
    let positives: Vec<usize> = doc.salient.iter().copied().collect();
    let negatives = doc.non_salient_entities();
    let total = positives.len() * negatives.len();
    let pair = |i: usize| SaliencePair {
        doc: doc_index,
        positive: positives[i / negatives.len()],
        negative: negatives[i % negatives.len()],
    };
    if total <= max_pairs {
        return (0..total).map(pair).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, total, max_pairs).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(pair).collect()
}
