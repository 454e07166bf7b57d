//! Joint word/entity symbol table.
//!
//! Words and entities are counted in separate namespaces but share one index
//! space, so a single embedding matrix covers both. The layout is fixed:
//!
//! | index                    | symbol        |
//! |--------------------------|---------------|
//! | 0                        | `Unk_word`    |
//! | 1                        | `Unk_entity`  |
//! | 2 .. 2 + W               | kept words (sorted) |
//! | 2 + W .. 2 + W + E       | kept entities (sorted) |

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::RawDocument;
use crate::{Error, Result};

pub const UNK_WORD: &str = "Unk_word";
pub const UNK_ENTITY: &str = "Unk_entity";
pub const UNK_WORD_INDEX: usize = 0;
pub const UNK_ENTITY_INDEX: usize = 1;

/// Default frequency threshold: symbols seen fewer than twice become Unk.
pub const DEFAULT_MIN_COUNT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Word,
    Entity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    entities: Vec<String>,
    word_index: BTreeMap<String, usize>,
    entity_index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit kept-symbol lists. Duplicates and the
    /// reserved Unk names are dropped; the rest is sorted.
    pub fn from_symbols<W, E>(words: W, entities: E) -> Self
    where
        W: IntoIterator,
        W::Item: Into<String>,
        E: IntoIterator,
        E::Item: Into<String>,
    {
        let mut words: Vec<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w| w != UNK_WORD)
            .collect();
        let mut entities: Vec<String> = entities
            .into_iter()
            .map(Into::into)
            .filter(|e| e != UNK_ENTITY)
            .collect();
        words.sort();
        words.dedup();
        entities.sort();
        entities.dedup();

        let word_index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), 2 + i))
            .collect();
        let base = 2 + words.len();
        let entity_index = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), base + i))
            .collect();
        Self {
            words,
            entities,
            word_index,
            entity_index,
        }
    }

    /// A vocabulary holding only the two Unk symbols.
    pub fn empty() -> Self {
        Self::from_symbols(Vec::<String>::new(), Vec::<String>::new())
    }

    pub fn unk_word_index(&self) -> usize {
        UNK_WORD_INDEX
    }

    pub fn unk_entity_index(&self) -> usize {
        UNK_ENTITY_INDEX
    }

    /// Total number of indices, Unk symbols included.
    pub fn len(&self) -> usize {
        2 + self.words.len() + self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Kept words, excluding `Unk_word`, in index order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Kept entities, excluding `Unk_entity`, in index order.
    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    /// Index of `word`, or `Unk_word` if it was not kept.
    pub fn word(&self, word: &str) -> usize {
        self.lookup_word(word).unwrap_or(UNK_WORD_INDEX)
    }

    /// Index of `entity`, or `Unk_entity` if it was not kept.
    pub fn entity(&self, entity: &str) -> usize {
        self.lookup_entity(entity).unwrap_or(UNK_ENTITY_INDEX)
    }

    pub fn lookup_word(&self, word: &str) -> Option<usize> {
        if word == UNK_WORD {
            return Some(UNK_WORD_INDEX);
        }
        self.word_index.get(word).copied()
    }

    pub fn lookup_entity(&self, entity: &str) -> Option<usize> {
        if entity == UNK_ENTITY {
            return Some(UNK_ENTITY_INDEX);
        }
        self.entity_index.get(entity).copied()
    }

    pub fn symbol(&self, index: usize) -> Option<(&str, SymbolKind)> {
        let n_words = self.words.len();
        match index {
            UNK_WORD_INDEX => Some((UNK_WORD, SymbolKind::Word)),
            UNK_ENTITY_INDEX => Some((UNK_ENTITY, SymbolKind::Entity)),
            i if i < 2 + n_words => Some((&self.words[i - 2], SymbolKind::Word)),
            i => self
                .entities
                .get(i - 2 - n_words)
                .map(|e| (e.as_str(), SymbolKind::Entity)),
        }
    }

    pub fn is_entity(&self, index: usize) -> bool {
        matches!(self.symbol(index), Some((_, SymbolKind::Entity)))
    }
}

/// Symbol occurrence counts, accumulated one document at a time. Counts from
/// shards can be combined with [`VocabularyCounts::merge`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VocabularyCounts {
    words: BTreeMap<String, usize>,
    entities: BTreeMap<String, usize>,
}

impl VocabularyCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates `doc` and adds its tokens and mention occurrences.
    pub fn add(&mut self, doc: &RawDocument) -> Result<()> {
        doc.validate()?;
        for w in &doc.words {
            *self.words.entry(w.clone()).or_default() += 1;
        }
        for m in &doc.entities {
            if !m.positions.is_empty() {
                *self.entities.entry(m.id.clone()).or_default() += m.positions.len();
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: VocabularyCounts) {
        for (w, c) in other.words {
            *self.words.entry(w).or_default() += c;
        }
        for (e, c) in other.entities {
            *self.entities.entry(e).or_default() += c;
        }
    }

    pub fn word_count(&self, word: &str) -> usize {
        self.words.get(word).copied().unwrap_or(0)
    }

    pub fn entity_count(&self, entity: &str) -> usize {
        self.entities.get(entity).copied().unwrap_or(0)
    }

    pub fn finish(&self, min_count: usize) -> Result<Vocabulary> {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be at least 1".to_string()));
        }
        let keep = |m: &BTreeMap<String, usize>| -> Vec<String> {
            m.iter()
                .filter(|(_, &c)| c >= min_count)
                .map(|(s, _)| s.clone())
                .collect()
        };
        Ok(Vocabulary::from_symbols(keep(&self.words), keep(&self.entities)))
    }
}

/// Counts words (tokens) and entities (mention occurrences) over `docs` and
/// keeps every symbol seen at least `min_count` times.
pub fn build_vocabulary<'a, I>(docs: I, min_count: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a RawDocument>,
{
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".to_string()));
    }
    let mut counts = VocabularyCounts::new();
    for doc in docs {
        counts.add(doc)?;
    }
    counts.finish(min_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RawMention;
    use alloc::vec;

    fn doc(id: &str, words: &[&str], entities: &[(&str, &[i64])]) -> RawDocument {
        RawDocument {
            doc_id: id.into(),
            words: words.iter().map(|w| (*w).into()).collect(),
            entities: entities
                .iter()
                .map(|(e, p)| RawMention {
                    id: (*e).into(),
                    positions: p.to_vec(),
                })
                .collect(),
            salient: vec![],
        }
    }

    #[test]
    fn rare_words_become_unk() {
        let d = doc("d1", &["a", "a", "a", "b"], &[]);
        let v = build_vocabulary([&d], 2).unwrap();
        assert_eq!(v.words(), &["a".to_string()]);
        assert_ne!(v.word("a"), UNK_WORD_INDEX);
        assert_eq!(v.word("b"), UNK_WORD_INDEX);
    }

    #[test]
    fn empty_stream_has_only_unk_symbols() {
        let v = build_vocabulary(core::iter::empty(), 2).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.symbol(0), Some((UNK_WORD, SymbolKind::Word)));
        assert_eq!(v.symbol(1), Some((UNK_ENTITY, SymbolKind::Entity)));
        assert_eq!(v.symbol(2), None);
    }

    #[test]
    fn entities_at_threshold_are_kept() {
        let d = doc("d1", &["x", "y", "z"], &[("E1", &[0, 1]), ("E2", &[1, 2])]);
        let v = build_vocabulary([&d], 2).unwrap();
        let (e1, e2) = (v.entity("E1"), v.entity("E2"));
        assert_ne!(e1, UNK_ENTITY_INDEX);
        assert_ne!(e2, UNK_ENTITY_INDEX);
        assert_ne!(e1, e2);
        assert!(v.is_entity(e1));
    }

    #[test]
    fn words_and_entities_have_separate_namespaces() {
        let d = doc("d1", &["Paris", "Paris"], &[("Paris", &[0, 1])]);
        let v = build_vocabulary([&d], 2).unwrap();
        assert_ne!(v.word("Paris"), v.entity("Paris"));
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn zero_min_count_is_rejected() {
        assert!(matches!(
            build_vocabulary(core::iter::empty(), 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn malformed_record_names_document_and_field() {
        let d = doc("bad-doc", &["a"], &[("E", &[3])]);
        match build_vocabulary([&d], 1) {
            Err(Error::MalformedRecord { doc_id, field, .. }) => {
                assert_eq!(doc_id, "bad-doc");
                assert!(field.starts_with("entities"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sharded_counts_merge() {
        let a = doc("a", &["w", "v"], &[]);
        let b = doc("b", &["w"], &[]);
        let mut left = VocabularyCounts::new();
        left.add(&a).unwrap();
        let mut right = VocabularyCounts::new();
        right.add(&b).unwrap();
        left.merge(right);
        assert_eq!(left.word_count("w"), 2);
        assert_eq!(left.finish(2).unwrap().words(), &["w".to_string()]);
    }

    proptest::proptest! {
        #[test]
        fn symbol_round_trip(words in proptest::collection::vec("[a-e]{1,3}", 0..20),
                             entities in proptest::collection::vec("[A-E]{1,3}", 0..20)) {
            let v = Vocabulary::from_symbols(words.clone(), entities.clone());
            for w in &words {
                let i = v.word(w);
                proptest::prop_assert!(i < v.len());
                proptest::prop_assert_eq!(v.symbol(i), Some((w.as_str(), SymbolKind::Word)));
            }
            for e in &entities {
                let i = v.entity(e);
                proptest::prop_assert!(i < v.len());
                proptest::prop_assert_eq!(v.symbol(i), Some((e.as_str(), SymbolKind::Entity)));
            }
        }
    }
}
