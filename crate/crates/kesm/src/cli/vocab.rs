use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use kesm_core::synthetic::{generate_synthetic_corpus, SyntheticSpec};
use kesm_core::vocab::{build_vocabulary, DEFAULT_MIN_COUNT};
use serde::Serialize;

use super::{finish, read_documents, Context};
use crate::formats::VocabFile;
use crate::io::{self, Outputs};
use crate::manifest::manifest_path;
use crate::Result;

#[derive(Debug, Args, Serialize)]
pub struct BuildVocabArgs {
    /// Training documents (JSON Lines); may be repeated.
    #[arg(long, required = true)]
    pub docs: Vec<PathBuf>,
    /// Symbols seen fewer times are mapped to Unk.
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub(super) fn build_vocab(ctx: &Context, args: BuildVocabArgs) -> Result<()> {
    let start = Instant::now();
    let mut manifest = ctx.manifest("build-vocab", &args, None);
    let mut docs = Vec::new();
    for path in &args.docs {
        docs.extend(read_documents(path, &mut manifest)?);
    }
    let vocab = build_vocabulary(&docs, args.min_count)?;
    log::info!("{} words and {} entities kept", vocab.words().len(), vocab.entities().len());
    manifest.details = serde_json::json!({
        "documents": docs.len(),
        "words": vocab.words().len(),
        "entities": vocab.entities().len(),
    });
    manifest.time("total", start.elapsed());
    let mut outputs = Outputs::new();
    outputs.add(&args.out, VocabFile::new(&vocab, args.min_count).to_bytes());
    finish(outputs, manifest, manifest_path(&args.out))
}

#[derive(Debug, Args, Serialize)]
pub struct GenSyntheticArgs {
    /// Generator settings (TOML); defaults apply to missing fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub(super) fn gen_synthetic(ctx: &Context, args: GenSyntheticArgs) -> Result<()> {
    let start = Instant::now();
    let spec: SyntheticSpec = match &args.spec {
        Some(p) => io::read_toml(p)?,
        None => SyntheticSpec::default(),
    };
    let mut manifest = ctx.manifest("gen-synthetic", &spec, Some(args.seed));
    if let Some(p) = &args.spec {
        manifest.input(p)?;
    }
    let corpus = generate_synthetic_corpus(&spec, args.seed)?;
    let mut outputs = Outputs::new();
    outputs.add(args.out.join("train.jsonl"), io::to_jsonl(&corpus.train));
    outputs.add(args.out.join("dev.jsonl"), io::to_jsonl(&corpus.dev));
    outputs.add(args.out.join("test.jsonl"), io::to_jsonl(&corpus.test));
    outputs.add(args.out.join("descriptions.jsonl"), io::to_jsonl(&corpus.descriptions));
    manifest.time("total", start.elapsed());
    finish(outputs, manifest, args.out.join("manifest.json"))
}
