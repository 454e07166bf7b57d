use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use kesm_core::salience::{train_salience, TrainConfig};
use kesm_core::{KernelBank, ModelParams};
use serde::Serialize;

use super::{encode_documents, finish, read_descriptions, read_documents, Context};
use crate::formats::checkpoint::Checkpoint;
use crate::formats::{apply_embeddings, read_vocab, EmbeddingRecord};
use crate::io::{self, Outputs};
use crate::manifest::manifest_path;
use crate::{Error, Result};

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Entity descriptions (JSON Lines).
    #[arg(long)]
    pub desc: Option<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training settings (TOML); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Initial embeddings (JSON Lines of symbol, kind, vector).
    #[arg(long)]
    pub init_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub max_pairs: Option<usize>,
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(p) => io::read_toml(p)?,
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(seed => seed, dim => dim, window => window, batch_size => batch_size, lr => lr,
             patience => patience, eval_interval => eval_interval, max_epochs => max_epochs,
             max_pairs => max_pairs_per_doc);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Serialize)]
struct Settings<'a> {
    args: &'a TrainArgs,
    effective: &'a TrainConfig,
}

pub(super) fn train(ctx: &Context, args: TrainArgs) -> Result<()> {
    let start = Instant::now();
    let config = args.config()?;
    let mut manifest = ctx.manifest(
        "train",
        &Settings {
            args: &args,
            effective: &config,
        },
        Some(config.seed),
    );
    if let Some(p) = &args.config {
        manifest.input(p)?;
    }
    let vocab = read_vocab(&args.vocab)?;
    manifest.input(&args.vocab)?;
    let train = encode_documents(&read_documents(&args.train, &mut manifest)?, &vocab, "train")?;
    let dev = encode_documents(&read_documents(&args.dev, &mut manifest)?, &vocab, "dev")?;
    let descriptions = read_descriptions(args.desc.as_ref(), &vocab, &mut manifest)?;
    let bank = KernelBank::default();

    let init = match &args.init_embeddings {
        Some(path) => {
            let records: Vec<EmbeddingRecord> = io::read_jsonl(path)?;
            manifest.input(path)?;
            let mut params = ModelParams::init(vocab.len(), config.dim, config.window, bank.len(), config.seed);
            let (applied, unknown) = apply_embeddings(path, &records, &vocab, &mut params)?;
            if unknown > 0 {
                log::warn!("{unknown} initial embeddings name symbols outside the vocabulary");
            }
            log::info!("initialised {applied} embedding rows from {}", path.display());
            Some(params)
        }
        None => None,
    };
    manifest.time("load", start.elapsed());

    let fit_start = Instant::now();
    let outcome = train_salience(&ctx.pool, &train, &dev, &descriptions, vocab.len(), &bank, &config, init)
        .map_err(|e| match e {
            kesm_core::Error::NoDevLabels => {
                Error::Usage(format!("{}: no document has a salient entity", args.dev.display()))
            }
            e => e.into(),
        })?;
    manifest.time("train", fit_start.elapsed());
    log::info!(
        "best dev P@1 {} at epoch {} after {} batches",
        outcome.best.precision_at_1,
        outcome.best.epoch,
        outcome.best.batches
    );
    manifest.details = serde_json::json!({
        "best": outcome.best,
        "history": outcome.history,
        "initial_loss": outcome.initial_loss,
        "epoch_losses": outcome.epoch_losses,
    });

    let checkpoint = Checkpoint {
        params: outcome.params,
        bank,
        vocab,
    };
    let mut outputs = Outputs::new();
    outputs.add(&args.out, checkpoint.to_bytes()?);
    manifest.time("total", start.elapsed());
    finish(outputs, manifest, manifest_path(&args.out))
}
