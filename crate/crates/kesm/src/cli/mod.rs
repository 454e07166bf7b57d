//! The `kesm` command line.

mod eval;
mod predict;
mod search;
mod train;
mod vocab;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use kesm_core::corpus::{encode_document, load_descriptions, DESCRIPTION_WORDS};
use kesm_core::vocab::Vocabulary;
use kesm_core::{DescriptionStore, Document, RawDescription, RawDocument};

use crate::exec::Pool;
use crate::io::{self, Outputs};
use crate::manifest::Manifest;
use crate::Result;

pub use predict::Method;

const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (file format version 1)");

#[derive(Debug, Parser)]
#[command(name = "kesm", version = LONG_VERSION, about = "Entity salience estimation and salience-based re-ranking")]
pub struct Cli {
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary file from training documents.
    BuildVocab(vocab::BuildVocabArgs),
    /// Train a salience model.
    Train(train::TrainArgs),
    /// Rank the entities of each document by salience.
    Predict(predict::PredictArgs),
    /// Train the feature-based LeToR salience baseline.
    TrainLetor(predict::TrainLetorArgs),
    /// Evaluate salience predictions or search runs.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
    /// Export salience ranking features for a base run.
    Features(search::FeaturesArgs),
    /// Re-rank a base run with cross-validated salience features.
    Rerank(search::RerankArgs),
    /// Generate a synthetic salience corpus.
    GenSynthetic(vocab::GenSyntheticArgs),
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = Pool::new(cli.threads)?;
    let ctx = Context { pool };
    match cli.command {
        Command::BuildVocab(a) => vocab::build_vocab(&ctx, a),
        Command::Train(a) => train::train(&ctx, a),
        Command::Predict(a) => predict::predict(&ctx, a),
        Command::TrainLetor(a) => predict::train_letor(&ctx, a),
        Command::Eval(c) => eval::eval(&ctx, c),
        Command::Features(a) => search::features(&ctx, a),
        Command::Rerank(a) => search::rerank(&ctx, a),
        Command::GenSynthetic(a) => vocab::gen_synthetic(&ctx, a),
    }
}

pub(crate) struct Context {
    pub pool: Pool,
}

impl Context {
    fn manifest(&self, command: &str, config: &impl serde::Serialize, seed: Option<u64>) -> Manifest {
        Manifest::new(command, config, seed, self.pool.threads())
    }
}

/// Adds the manifest to `outputs` and writes everything.
fn finish(mut outputs: Outputs, mut manifest: Manifest, manifest_file: PathBuf) -> Result<()> {
    manifest.outputs = outputs.paths().map(|p| p.display().to_string()).collect();
    outputs.add(manifest_file, manifest.to_bytes());
    outputs.commit()
}

fn read_documents(path: &Path, manifest: &mut Manifest) -> Result<Vec<RawDocument>> {
    let docs: Vec<RawDocument> = io::read_jsonl(path)?;
    manifest.input(path)?;
    Ok(docs)
}

fn encode_documents(raw: &[RawDocument], vocab: &Vocabulary, what: &str) -> Result<Vec<Document>> {
    let mut dropped = 0;
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        let (doc, report) = encode_document(r, vocab)?;
        dropped += report.dropped_salient;
        out.push(doc);
    }
    if dropped > 0 {
        log::warn!("{what}: dropped {dropped} salient labels of entities that are never mentioned");
    }
    Ok(out)
}

fn read_descriptions(path: Option<&PathBuf>, vocab: &Vocabulary, manifest: &mut Manifest) -> Result<DescriptionStore> {
    let Some(path) = path else {
        return Ok(DescriptionStore::new());
    };
    let records: Vec<RawDescription> = io::read_jsonl(path)?;
    manifest.input(path)?;
    let (store, report) = load_descriptions(records, vocab, DESCRIPTION_WORDS)?;
    if report.skipped > 0 || report.duplicates > 0 {
        log::warn!(
            "descriptions: skipped {} for entities outside the vocabulary, {} duplicates",
            report.skipped,
            report.duplicates
        );
    }
    Ok(store)
}
