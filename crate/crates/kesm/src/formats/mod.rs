//! On-disk formats.

pub mod checkpoint;
pub mod svmlight;
pub mod trec;
pub mod tsv;

use std::path::Path;

use kesm_core::vocab::Vocabulary;
use kesm_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::{io, Error, Result};

/// Version stamped into every JSON artifact this crate writes.
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn check_version(path: &Path, found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!("unsupported format_version {found} (expected {FORMAT_VERSION})"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabFile {
    pub format_version: u32,
    pub min_count: usize,
    pub words: Vec<String>,
    pub entities: Vec<String>,
}

impl VocabFile {
    pub fn new(vocab: &Vocabulary, min_count: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            min_count,
            words: vocab.words().to_vec(),
            entities: vocab.entities().to_vec(),
        }
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_symbols(self.words.iter().cloned(), self.entities.iter().cloned())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("in-memory serialization");
        out.push(b'\n');
        out
    }
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let file: VocabFile = io::read_json(path)?;
    check_version(path, file.format_version)?;
    Ok(file.vocabulary())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Word,
    Entity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub symbol: String,
    pub kind: EmbeddingKind,
    pub vector: Vec<f64>,
}

/// Copies external vectors into the matching rows of `V`. Returns how many
/// records were applied and how many named symbols outside the vocabulary.
pub fn apply_embeddings(
    path: &Path,
    records: &[EmbeddingRecord],
    vocab: &Vocabulary,
    params: &mut ModelParams,
) -> Result<(usize, usize)> {
    let (mut applied, mut unknown) = (0, 0);
    for (i, r) in records.iter().enumerate() {
        if r.vector.len() != params.dim {
            return Err(Error::parse(
                path,
                i + 1,
                format!("vector for `{}` has {} values, model dimension is {}", r.symbol, r.vector.len(), params.dim),
            ));
        }
        if r.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, i + 1, format!("vector for `{}` is not finite", r.symbol)));
        }
        let index = match r.kind {
            EmbeddingKind::Word => vocab.lookup_word(&r.symbol),
            EmbeddingKind::Entity => vocab.lookup_entity(&r.symbol),
        };
        match index {
            Some(idx) => {
                params.row_mut(idx).copy_from_slice(&r.vector);
                applied += 1;
            }
            None => unknown += 1,
        }
    }
    Ok((applied, unknown))
}
