//! Knowledge-enriched entity embeddings and kernel interaction features.
//!
//! An entity's vector is `W_p · (V[e] ⊔ cnn(description))`, where the
//! description encoder is a width-`h` convolution over word embeddings
//! followed by max-pooling over window positions. The target entity is then
//! compared by cosine against every entity mention and every word token of a
//! document, and each RBF kernel of the [`KernelBank`] sums
//! `exp(-(cos - μ)² / 2σ²)` over those comparisons.
//!
//! Everything is computed in `f64`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DescriptionStore, Document};
use crate::math::{axpy, dot, matvec, matvec_t_acc, norm, outer_acc};
use crate::vocab::UNK_WORD_INDEX;
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 128;
pub const DEFAULT_WINDOW: usize = 3;

/// Norms below this are treated as zero; cosine against a zero vector is 0.
pub const ZERO_NORM: f64 = 1e-12;

/// Means and widths of the RBF kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
}

impl Default for KernelBank {
    /// One exact-match kernel (μ = 1, σ = 1e-3) and ten soft kernels at
    /// μ ∈ {-0.9, -0.7, …, 0.9} with σ = 0.1.
    fn default() -> Self {
        let mut mus = vec![1.0];
        let mut sigmas = vec![1e-3];
        for i in 0..10 {
            mus.push(-0.9 + 0.2 * i as f64);
            sigmas.push(0.1);
        }
        Self { mus, sigmas }
    }
}

impl KernelBank {
    pub fn new(mus: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        if mus.len() != sigmas.len() {
            return Err(Error::DimensionMismatch {
                expected: mus.len(),
                found: sigmas.len(),
            });
        }
        if mus.is_empty() {
            return Err(Error::InvalidArgument("kernel bank is empty".into()));
        }
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument("kernel sigma must be positive".into()));
        }
        if mus.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("kernel mu must be finite".into()));
        }
        Ok(Self { mus, sigmas })
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Value of kernel `k` at cosine `c`.
    pub fn value(&self, k: usize, c: f64) -> f64 {
        let d = c - self.mus[k];
        let s = self.sigmas[k];
        libm::exp(-(d * d) / (2.0 * s * s))
    }

    /// `out[k] += weight · φ_k(c)` for every kernel.
    fn accumulate(&self, c: f64, weight: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o += weight * self.value(k, c);
        }
    }

    /// `Σ_k g[k] · dφ_k/dc` at cosine `c`.
    fn derivative(&self, c: f64, g: &[f64]) -> f64 {
        let mut total = 0.0;
        for (k, &gk) in g.iter().enumerate() {
            if gk != 0.0 {
                let s2 = self.sigmas[k] * self.sigmas[k];
                total += gk * self.value(k, c) * (-(c - self.mus[k]) / s2);
            }
        }
        total
    }
}

/// Pooled kernel features of one target entity in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelScores {
    pub entity_kernels: Vec<f64>,
    pub word_kernels: Vec<f64>,
}

impl KernelScores {
    pub fn zeros(k: usize) -> Self {
        Self {
            entity_kernels: vec![0.0; k],
            word_kernels: vec![0.0; k],
        }
    }

    /// `entity_kernels ⊔ word_kernels`.
    pub fn concat(&self) -> Vec<f64> {
        let mut v = self.entity_kernels.clone();
        v.extend_from_slice(&self.word_kernels);
        v
    }
}

/// All learned tensors. Matrices are row-major.
///
/// * `embeddings` (`V`): `vocab_size × dim`, shared by words and entities.
/// * `conv` (`W_c`): `dim × (window · dim)`.
/// * `projection` (`W_p`): `dim × 2·dim`.
/// * `salience_weights` (`W_s`): `2K`, entity kernels first.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub vocab_size: usize,
    pub dim: usize,
    pub window: usize,
    pub n_kernels: usize,
    pub embeddings: Vec<f64>,
    pub conv: Vec<f64>,
    pub projection: Vec<f64>,
    pub salience_weights: Vec<f64>,
    pub salience_bias: f64,
}

impl ModelParams {
    pub fn zeros(vocab_size: usize, dim: usize, window: usize, n_kernels: usize) -> Self {
        Self {
            vocab_size,
            dim,
            window,
            n_kernels,
            embeddings: vec![0.0; vocab_size * dim],
            conv: vec![0.0; dim * window * dim],
            projection: vec![0.0; dim * 2 * dim],
            salience_weights: vec![0.0; 2 * n_kernels],
            salience_bias: 0.0,
        }
    }

    /// Random initialisation: embeddings uniform in ±0.01, the convolution and
    /// projection Glorot-uniform, salience weights uniform in ±0.01 and a zero
    /// bias.
    pub fn init(vocab_size: usize, dim: usize, window: usize, n_kernels: usize, seed: u64) -> Self {
        let mut p = Self::zeros(vocab_size, dim, window, n_kernels);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |t: &mut [f64], bound: f64| {
            for x in t.iter_mut() {
                *x = rng.gen_range(-bound..bound);
            }
        };
        fill(&mut p.embeddings, 0.01);
        let conv_bound = libm::sqrt(6.0 / (dim * window + dim) as f64);
        fill(&mut p.conv, conv_bound);
        let proj_bound = libm::sqrt(6.0 / (3 * dim) as f64);
        fill(&mut p.projection, proj_bound);
        fill(&mut p.salience_weights, 0.01);
        p
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, t: &[f64], expected: usize| -> Result<()> {
            if t.len() != expected {
                return Err(Error::ShapeMismatch {
                    tensor: name,
                    expected,
                    found: t.len(),
                });
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
            Ok(())
        };
        if self.dim == 0 || self.window == 0 || self.n_kernels == 0 {
            return Err(Error::InvalidArgument("dim, window and kernel count must be positive".into()));
        }
        let d = self.dim;
        check("V", &self.embeddings, self.vocab_size * d)?;
        check("W_c", &self.conv, d * self.window * d)?;
        check("W_p", &self.projection, d * 2 * d)?;
        check("W_s", &self.salience_weights, 2 * self.n_kernels)?;
        check("b_s", core::slice::from_ref(&self.salience_bias), 1)?;
        Ok(())
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.embeddings[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.embeddings[index * d..(index + 1) * d]
    }

    /// The five tensors in a fixed order: `V`, `W_c`, `W_p`, `W_s`, `b_s`.
    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.embeddings,
            &self.conv,
            &self.projection,
            &self.salience_weights,
            core::slice::from_ref(&self.salience_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.embeddings,
            &mut self.conv,
            &mut self.projection,
            &mut self.salience_weights,
            core::slice::from_mut(&mut self.salience_bias),
        ]
    }
}

/// Cosine similarity in `[-1, 1]`; zero if either vector has (near) zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(cosine_with_norms(u, norm(u), v, norm(v)).0)
}

/// Returns the clamped cosine and whether the derivative is live (both norms
/// non-zero and the raw value inside the clamp range).
fn cosine_with_norms(u: &[f64], nu: f64, v: &[f64], nv: f64) -> (f64, bool) {
    if nu < ZERO_NORM || nv < ZERO_NORM {
        return (0.0, false);
    }
    let c = dot(u, v) / (nu * nv);
    if c > 1.0 {
        (1.0, false)
    } else if c < -1.0 {
        (-1.0, false)
    } else {
        (c, true)
    }
}

/// Forward state of the description encoder, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionEncoding {
    pub output: Vec<f64>,
    /// Word indices of every window, flattened (`n_windows × window`).
    windows: Vec<usize>,
    /// Winning window per output coordinate.
    argmax: Vec<usize>,
}

impl DescriptionEncoding {
    fn window_input(&self, p: usize, params: &ModelParams) -> Vec<f64> {
        let h = params.window;
        let mut x = Vec::with_capacity(h * params.dim);
        for &w in &self.windows[p * h..(p + 1) * h] {
            x.extend_from_slice(params.row(w));
        }
        x
    }
}

fn encode_description(words: &[usize], params: &ModelParams) -> DescriptionEncoding {
    let (d, h) = (params.dim, params.window);
    if words.is_empty() {
        return DescriptionEncoding {
            output: vec![0.0; d],
            windows: Vec::new(),
            argmax: Vec::new(),
        };
    }
    let mut padded = words.to_vec();
    while padded.len() < h {
        padded.push(UNK_WORD_INDEX);
    }
    let n_windows = padded.len() - h + 1;
    let mut windows = Vec::with_capacity(n_windows * h);
    for p in 0..n_windows {
        windows.extend_from_slice(&padded[p..p + h]);
    }
    let mut enc = DescriptionEncoding {
        output: vec![f64::NEG_INFINITY; d],
        windows,
        argmax: vec![0; d],
    };
    let mut c = vec![0.0; d];
    for p in 0..n_windows {
        let x = enc.window_input(p, params);
        matvec(&params.conv, &x, &mut c);
        for i in 0..d {
            // strict comparison: the first window wins ties
            if c[i] > enc.output[i] {
                enc.output[i] = c[i];
                enc.argmax[i] = p;
            }
        }
    }
    enc
}

/// Max-pooled convolution over the description's word embeddings. Shorter
/// than `window` words are right-padded with `Unk_word`; an empty description
/// encodes to the zero vector.
pub fn describe_embedding(words: &[usize], params: &ModelParams) -> Vec<f64> {
    encode_description(words, params).output
}

/// Forward state of one entity's KEE vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityEncoding {
    pub entity: usize,
    /// `V[e] ⊔ v_D`.
    pub input: Vec<f64>,
    pub description: DescriptionEncoding,
    pub vector: Vec<f64>,
    pub norm: f64,
}

pub fn encode_entity(entity: usize, descriptions: &DescriptionStore, params: &ModelParams) -> EntityEncoding {
    let description = encode_description(descriptions.get(entity).unwrap_or(&[]), params);
    let mut input = params.row(entity).to_vec();
    input.extend_from_slice(&description.output);
    let mut vector = vec![0.0; params.dim];
    matvec(&params.projection, &input, &mut vector);
    let n = norm(&vector);
    EntityEncoding {
        entity,
        input,
        description,
        vector,
        norm: n,
    }
}

/// KEE vector `W_p · (V[e] ⊔ describe_embedding(D_e))`; an absent description
/// counts as empty.
pub fn kee_embed(entity: usize, descriptions: &DescriptionStore, params: &ModelParams) -> Vec<f64> {
    encode_entity(entity, descriptions, params).vector
}

/// `φ_k = Σ_j exp(-(cos(target, c_j) - μ_k)² / 2σ_k²)` for every kernel.
pub fn kernel_pool<'a, I>(target: &[f64], context: I, bank: &KernelBank) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = vec![0.0; bank.len()];
    let nt = norm(target);
    for c in context {
        debug_assert_eq!(c.len(), target.len());
        let (cos, _) = cosine_with_norms(target, nt, c, norm(c));
        bank.accumulate(cos, 1.0, &mut out);
    }
    out
}

/// Encoded interaction context of one document: the KEE vector of every
/// distinct mentioned entity and the embedding norm of every distinct word,
/// each with its multiplicity.
#[derive(Debug, Clone)]
pub struct DocContext {
    pub entities: Vec<(EntityEncoding, usize)>,
    /// `(word index, count, embedding norm)`.
    pub words: Vec<(usize, usize, f64)>,
    /// Position of each entity in `entities`.
    slots: BTreeMap<usize, usize>,
    pub total_mentions: usize,
}

impl DocContext {
    pub fn new(doc: &Document, descriptions: &DescriptionStore, params: &ModelParams) -> Self {
        let mut entities = Vec::new();
        let mut slots = BTreeMap::new();
        for (e, n) in doc.entity_counts() {
            slots.insert(e, entities.len());
            entities.push((encode_entity(e, descriptions, params), n));
        }
        let words = doc
            .word_counts()
            .into_iter()
            .map(|(w, n)| (w, n, norm(params.row(w))))
            .collect();
        Self {
            entities,
            words,
            slots,
            total_mentions: doc.mentions.len(),
        }
    }

    pub fn encoding(&self, entity: usize) -> Option<&EntityEncoding> {
        self.slots.get(&entity).map(|&s| &self.entities[s].0)
    }

    /// Kernel scores of an already encoded target against this document.
    /// Multiplicities are folded in as weights, so the result is identical to
    /// a per-mention, per-token sum up to rounding.
    pub fn kim(&self, target: &EntityEncoding, params: &ModelParams, bank: &KernelBank) -> KernelScores {
        let mut scores = KernelScores::zeros(bank.len());
        for (enc, n) in &self.entities {
            let (c, _) = cosine_with_norms(&target.vector, target.norm, &enc.vector, enc.norm);
            bank.accumulate(c, *n as f64, &mut scores.entity_kernels);
        }
        for &(w, n, nw) in &self.words {
            let (c, _) = cosine_with_norms(&target.vector, target.norm, params.row(w), nw);
            bank.accumulate(c, n as f64, &mut scores.word_kernels);
        }
        scores
    }
}

/// `Φ(e, E) ⊔ Φ(e, W)`: kernel scores of `entity` against every mention and
/// every token of `doc`. The entity need not occur in the document.
pub fn kim(
    entity: usize,
    doc: &Document,
    descriptions: &DescriptionStore,
    params: &ModelParams,
    bank: &KernelBank,
) -> KernelScores {
    let ctx = DocContext::new(doc, descriptions, params);
    let target = match ctx.encoding(entity) {
        Some(enc) => enc.clone(),
        None => encode_entity(entity, descriptions, params),
    };
    ctx.kim(&target, params, bank)
}

/// Sparse gradient accumulator over the model tensors; embedding rows are
/// only materialised when touched.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseGrads {
    pub rows: BTreeMap<usize, Vec<f64>>,
    pub conv: Vec<f64>,
    pub projection: Vec<f64>,
    pub salience_weights: Vec<f64>,
    pub salience_bias: f64,
}

impl SparseGrads {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            rows: BTreeMap::new(),
            conv: vec![0.0; params.conv.len()],
            projection: vec![0.0; params.projection.len()],
            salience_weights: vec![0.0; params.salience_weights.len()],
            salience_bias: 0.0,
        }
    }

    pub fn row(&mut self, index: usize, dim: usize) -> &mut Vec<f64> {
        self.rows.entry(index).or_insert_with(|| vec![0.0; dim])
    }
}

impl DocContext {
    /// Back-propagates `g` (`dL/dΦ`, entity kernels then word kernels) for
    /// `target` into the KEE vectors of this document's entities
    /// (`entity_grads`, indexed like `self.entities`), the target's own KEE
    /// gradient and the word embedding rows.
    pub(crate) fn kim_backward(
        &self,
        target: &EntityEncoding,
        g: &[f64],
        params: &ModelParams,
        bank: &KernelBank,
        target_grad: &mut [f64],
        entity_grads: &mut [Vec<f64>],
        grads: &mut SparseGrads,
    ) {
        let k = bank.len();
        let (g_ent, g_word) = g.split_at(k);
        let t = &target.vector;
        let nt = target.norm;
        for ((enc, n), eg) in self.entities.iter().zip(entity_grads.iter_mut()) {
            let (c, live) = cosine_with_norms(t, nt, &enc.vector, enc.norm);
            if !live {
                continue;
            }
            let dc = *n as f64 * bank.derivative(c, g_ent);
            if dc == 0.0 {
                continue;
            }
            cosine_backward(t, nt, &enc.vector, enc.norm, c, dc, target_grad, eg);
        }
        let d = params.dim;
        for &(w, n, nw) in &self.words {
            let row = params.row(w);
            let (c, live) = cosine_with_norms(t, nt, row, nw);
            if !live {
                continue;
            }
            let dc = n as f64 * bank.derivative(c, g_word);
            if dc == 0.0 {
                continue;
            }
            let rg = grads.row(w, d);
            cosine_backward(t, nt, row, nw, c, dc, target_grad, rg);
        }
    }
}

/// Accumulates `dc · ∂cos/∂u` into `gu` and `dc · ∂cos/∂v` into `gv`.
#[allow(clippy::too_many_arguments)]
fn cosine_backward(u: &[f64], nu: f64, v: &[f64], nv: f64, c: f64, dc: f64, gu: &mut [f64], gv: &mut [f64]) {
    let inv = 1.0 / (nu * nv);
    let su = c / (nu * nu);
    let sv = c / (nv * nv);
    for i in 0..u.len() {
        gu[i] += dc * (v[i] * inv - su * u[i]);
        gv[i] += dc * (u[i] * inv - sv * v[i]);
    }
}

/// Back-propagates a KEE-vector gradient through the projection and the
/// description CNN.
pub(crate) fn entity_backward(enc: &EntityEncoding, g: &[f64], params: &ModelParams, grads: &mut SparseGrads) {
    let d = params.dim;
    outer_acc(g, &enc.input, &mut grads.projection);
    let mut g_input = vec![0.0; 2 * d];
    matvec_t_acc(&params.projection, g, &mut g_input);
    let (g_emb, g_desc) = g_input.split_at(d);
    axpy(1.0, g_emb, grads.row(enc.entity, d));

    let desc = &enc.description;
    if desc.argmax.is_empty() {
        return;
    }
    let hd = params.window * d;
    let mut inputs: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, &gi) in g_desc.iter().enumerate() {
        if gi == 0.0 {
            continue;
        }
        let p = desc.argmax[i];
        let x = inputs.entry(p).or_insert_with(|| desc.window_input(p, params));
        axpy(gi, x, &mut grads.conv[i * hd..(i + 1) * hd]);
        let filter = &params.conv[i * hd..(i + 1) * hd];
        for (t, &w) in desc.windows[p * params.window..(p + 1) * params.window].iter().enumerate() {
            axpy(gi, &filter[t * d..(t + 1) * d], grads.row(w, d));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Mention;
    use alloc::collections::BTreeSet;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn default_bank_layout() {
        let bank = KernelBank::default();
        assert_eq!(bank.len(), 11);
        assert_eq!(bank.mus()[0], 1.0);
        assert_eq!(bank.sigmas()[0], 1e-3);
        assert!(close(bank.mus()[1], -0.9, 1e-12));
        assert!(close(bank.mus()[10], 0.9, 1e-12));
        assert!(bank.sigmas()[1..].iter().all(|&s| s == 0.1));
    }

    #[test]
    fn bank_rejects_bad_sigma() {
        assert!(KernelBank::new(vec![0.0], vec![0.0]).is_err());
        assert!(KernelBank::new(vec![0.0, 1.0], vec![0.1]).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let c = cosine(&[3.0, 4.0], &[6.0, 8.0]).unwrap();
        assert!(c <= 1.0 && close(c, 1.0, 1e-15));
    }

    #[test]
    fn kernel_pool_examples() {
        let bank = KernelBank::default();
        let out = kernel_pool(&[1.0, 0.0], [&[1.0, 0.0][..]], &bank);
        assert!(close(out[0], 1.0, 1e-15));
        assert!(close(out[10], 0.606531, 1e-6));
        assert!(close(out[10], libm::exp(-0.5), 1e-12));

        let empty = kernel_pool(&[1.0, 0.0], core::iter::empty(), &bank);
        assert!(empty.iter().all(|&x| x == 0.0));

        // μ = 0.7 is kernel 9.
        let ctx = [&[0.0, 1.0][..], &[0.7071, 0.7071][..]];
        let out = kernel_pool(&[1.0, 0.0], ctx, &bank);
        assert!(close(bank.mus()[9], 0.7, 1e-12));
        assert!(close(out[9], 0.997478, 1e-6), "{}", out[9]);
    }

    fn small_params(vocab: usize, d: usize) -> ModelParams {
        ModelParams::init(vocab, d, 3, 11, 42)
    }

    #[test]
    fn empty_description_is_zero() {
        let p = small_params(6, 4);
        assert_eq!(describe_embedding(&[], &p), vec![0.0; 4]);
    }

    #[test]
    fn three_word_description_is_single_window() {
        let p = small_params(6, 4);
        let mut x = Vec::new();
        for w in [2, 3, 4] {
            x.extend_from_slice(p.row(w));
        }
        let mut expected = vec![0.0; 4];
        matvec(&p.conv, &x, &mut expected);
        assert_eq!(describe_embedding(&[2, 3, 4], &p), expected);
    }

    #[test]
    fn short_descriptions_pad_with_unk_word() {
        let p = small_params(6, 4);
        assert_eq!(
            describe_embedding(&[3], &p),
            describe_embedding(&[3, UNK_WORD_INDEX, UNK_WORD_INDEX], &p)
        );
    }

    #[test]
    fn max_pool_picks_dominant_window() {
        // Word 2 has a large positive embedding; W_c reads only the first
        // slot, so window 1 (starting at word 2) dominates every coordinate.
        let d = 2;
        let mut p = ModelParams::zeros(6, d, 3, 11);
        p.row_mut(2).copy_from_slice(&[5.0, 5.0]);
        for w in [3, 4, 5] {
            p.row_mut(w).copy_from_slice(&[0.1, -0.2]);
        }
        for i in 0..d {
            for c in 0..3 * d {
                p.conv[i * 3 * d + c] = if c < d { 1.0 + i as f64 } else { 0.25 };
            }
        }
        let out = describe_embedding(&[2, 3, 4, 5], &p);
        let mut x = Vec::new();
        for w in [2, 3, 4] {
            x.extend_from_slice(p.row(w));
        }
        let mut first = vec![0.0; d];
        matvec(&p.conv, &x, &mut first);
        assert_eq!(out, first);
    }

    #[test]
    fn kee_with_identity_projection() {
        let d = 3;
        let mut p = small_params(8, d);
        p.projection = vec![0.0; d * 2 * d];
        for i in 0..d {
            p.projection[i * 2 * d + i] = 1.0;
            p.projection[i * 2 * d + d + i] = 1.0;
        }
        let mut descs = DescriptionStore::new();
        descs.insert(6, vec![2, 3, 4, 5]);
        let v = kee_embed(6, &descs, &p);
        let vd = describe_embedding(&[2, 3, 4, 5], &p);
        for i in 0..d {
            assert!(close(v[i], p.row(6)[i] + vd[i], 1e-15));
        }
        assert_eq!(kee_embed(7, &descs, &p), p.row(7).to_vec());
    }

    #[test]
    fn single_mention_without_words() {
        let p = small_params(4, 4);
        let doc = Document {
            doc_id: "d".into(),
            words: vec![],
            mentions: vec![],
            salient: BTreeSet::new(),
        };
        // a mention needs a token, so the word kernels see that token
        let doc_with = Document::new(
            "d",
            vec![0],
            vec![Mention { entity: 3, position: 0 }],
            BTreeSet::new(),
        )
        .unwrap();
        let s = kim(3, &doc, &DescriptionStore::new(), &p, &KernelBank::default());
        assert!(s.entity_kernels.iter().all(|&x| x == 0.0));
        let s = kim(3, &doc_with, &DescriptionStore::new(), &p, &KernelBank::default());
        assert!(close(s.entity_kernels[0], 1.0, 1e-12));
    }

    #[test]
    fn duplicating_document_doubles_scores() {
        let p = small_params(10, 5);
        let mentions = vec![
            Mention { entity: 6, position: 0 },
            Mention { entity: 7, position: 1 },
            Mention { entity: 6, position: 2 },
        ];
        let words = vec![2, 3, 4];
        let doc = Document::new("d", words.clone(), mentions.clone(), BTreeSet::new()).unwrap();
        let mut w2 = words.clone();
        w2.extend(&words);
        let mut m2 = mentions.clone();
        m2.extend(mentions.iter().map(|m| Mention { entity: m.entity, position: m.position + 3 }));
        let doubled = Document::new("d", w2, m2, BTreeSet::new()).unwrap();
        let bank = KernelBank::default();
        let descs = DescriptionStore::new();
        let a = kim(6, &doc, &descs, &p, &bank);
        let b = kim(6, &doubled, &descs, &p, &bank);
        for (x, y) in a.concat().iter().zip(b.concat()) {
            assert_eq!(2.0 * x, y);
        }
    }

    #[test]
    fn params_validate_detects_shape_and_nan() {
        let mut p = small_params(4, 3);
        assert!(p.validate().is_ok());
        p.salience_weights.pop();
        assert!(matches!(p.validate(), Err(Error::ShapeMismatch { tensor: "W_s", .. })));
        let mut p = small_params(4, 3);
        p.conv[0] = f64::NAN;
        assert_eq!(p.validate(), Err(Error::NonFinite("W_c")));
    }

    proptest::proptest! {
        #[test]
        fn kernel_bounds_and_monotonicity(
            target in proptest::collection::vec(-1.0f64..1.0, 4),
            ctx in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 0..12),
        ) {
            let bank = KernelBank::default();
            let refs: Vec<&[f64]> = ctx.iter().map(Vec::as_slice).collect();
            let out = kernel_pool(&target, refs.iter().copied(), &bank);
            for &x in &out {
                proptest::prop_assert!(x >= 0.0 && x <= ctx.len() as f64 + 1e-12);
            }
            let mut rev = refs.clone();
            rev.reverse();
            let out_rev = kernel_pool(&target, rev, &bank);
            for (a, b) in out.iter().zip(&out_rev) {
                proptest::prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn moving_closer_to_mu_never_decreases(c in -1.0f64..1.0, t in 0.0f64..1.0, k in 0usize..11) {
            let bank = KernelBank::default();
            let closer = c + t * (bank.mus()[k] - c);
            proptest::prop_assert!(bank.value(k, closer) >= bank.value(k, c));
        }
    }
}
