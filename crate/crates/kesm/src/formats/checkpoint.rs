//! Model checkpoints as a single JSON document.
//!
//! Numbers are written in shortest round-trip form, so loading a saved
//! checkpoint reproduces every parameter bit for bit.

use std::path::Path;

use kesm_core::vocab::Vocabulary;
use kesm_core::{KernelBank, ModelParams};
use serde::{Deserialize, Serialize};

use super::{check_version, FORMAT_VERSION};
use crate::{io, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub bank: KernelBank,
    pub vocab: Vocabulary,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Kernels {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Symbols {
    words: Vec<String>,
    entities: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tensors {
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    #[serde(rename = "W_c")]
    w_c: Vec<Vec<f64>>,
    #[serde(rename = "W_p")]
    w_p: Vec<Vec<f64>>,
    #[serde(rename = "W_s")]
    w_s: Vec<f64>,
    b_s: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    format_version: u32,
    d: usize,
    h: usize,
    kernels: Kernels,
    vocabulary: Symbols,
    tensors: Tensors,
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    if width == 0 {
        return Vec::new();
    }
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

fn flatten(path: &Path, name: &str, rows: Vec<Vec<f64>>, width: usize) -> Result<Vec<f64>> {
    if let Some(r) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::parse(
            path,
            1,
            format!("tensor {name} has a row of length {} (expected {width})", r.len()),
        ));
    }
    Ok(rows.into_iter().flatten().collect())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.params.validate()?;
        let p = &self.params;
        let file = File {
            format_version: FORMAT_VERSION,
            d: p.dim,
            h: p.window,
            kernels: Kernels {
                mu: self.bank.mus().to_vec(),
                sigma: self.bank.sigmas().to_vec(),
            },
            vocabulary: Symbols {
                words: self.vocab.words().to_vec(),
                entities: self.vocab.entities().to_vec(),
            },
            tensors: Tensors {
                v: rows(&p.embeddings, p.dim),
                w_c: rows(&p.conv, p.window * p.dim),
                w_p: rows(&p.projection, 2 * p.dim),
                w_s: p.salience_weights.clone(),
                b_s: p.salience_bias,
            },
        };
        let mut out = serde_json::to_vec(&file).expect("in-memory serialization");
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_str(path: &Path, text: &str) -> Result<Self> {
        let file: File = serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        check_version(path, file.format_version)?;
        let bank = KernelBank::new(file.kernels.mu, file.kernels.sigma)?;
        let vocab = Vocabulary::from_symbols(file.vocabulary.words.iter().cloned(), file.vocabulary.entities.iter().cloned());
        if vocab.words() != file.vocabulary.words.as_slice() || vocab.entities() != file.vocabulary.entities.as_slice() {
            return Err(Error::parse(path, 1, "vocabulary lists must be sorted, unique and free of Unk symbols"));
        }
        let (d, h) = (file.d, file.h);
        let t = file.tensors;
        if t.v.len() != vocab.len() {
            return Err(Error::parse(
                path,
                1,
                format!("V has {} rows but the vocabulary has {} symbols", t.v.len(), vocab.len()),
            ));
        }
        let params = ModelParams {
            vocab_size: vocab.len(),
            dim: d,
            window: h,
            n_kernels: bank.len(),
            embeddings: flatten(path, "V", t.v, d)?,
            conv: flatten(path, "W_c", t.w_c, h * d)?,
            projection: flatten(path, "W_p", t.w_p, 2 * d)?,
            salience_weights: t.w_s,
            salience_bias: t.b_s,
        };
        params.validate()?;
        Ok(Self { params, bank, vocab })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_str(path, &io::read_to_string(path)?)
    }
}
