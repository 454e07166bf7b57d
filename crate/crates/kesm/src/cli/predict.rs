use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use kesm_core::baselines::{
    fit_pagerank_alpha, frequency_scores, letor_features, letor_pairs, pagerank_scores, train_linear_pairwise,
    LinearRankerParams, LinearTrainConfig, LETOR_FEATURES,
};
use kesm_core::salience::rank_entities;
use kesm_core::vocab::Vocabulary;
use kesm_core::{DescriptionStore, Executor, RawDocument};
use serde::{Deserialize, Serialize};

use super::{encode_documents, finish, read_descriptions, read_documents, Context};
use crate::formats::checkpoint::Checkpoint;
use crate::formats::tsv::{format_predictions, Prediction};
use crate::formats::{check_version, FORMAT_VERSION};
use crate::io::{self, Outputs};
use crate::manifest::manifest_path;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kesm,
    Frequency,
    Pagerank,
    Letor,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
    /// Trained checkpoint; not needed for `frequency`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub desc: Option<PathBuf>,
    /// PageRank mixing weight in [0, 1].
    #[arg(long, conflicts_with = "dev")]
    pub alpha: Option<f64>,
    /// Labelled documents for choosing the PageRank alpha.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// LeToR model from `train-letor`.
    #[arg(long)]
    pub letor: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LetorFile {
    pub format_version: u32,
    pub ranker: LinearRankerParams,
}

fn load_model(path: Option<&PathBuf>, method: Method, manifest: &mut crate::manifest::Manifest) -> Result<Checkpoint> {
    let Some(path) = path else {
        return Err(Error::Usage(format!("--model is required for --method {method:?}").to_lowercase()));
    };
    let c = Checkpoint::load(path)?;
    manifest.input(path)?;
    Ok(c)
}

/// Orders the distinct raw entities of `raw` by the score of their
/// vocabulary index: score descending, then index, then raw id.
fn expand(raw: &RawDocument, vocab: &Vocabulary, scores: &BTreeMap<usize, f64>) -> Vec<(String, f64)> {
    let mut rows: Vec<(usize, &str, f64)> = Vec::new();
    for m in &raw.entities {
        if rows.iter().any(|(_, id, _)| *id == m.id) {
            continue;
        }
        let idx = vocab.entity(&m.id);
        if let Some(&s) = scores.get(&idx) {
            rows.push((idx, &m.id, s));
        }
    }
    rows.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(b.1)));
    rows.into_iter().map(|(_, id, s)| (id.to_string(), s)).collect()
}

pub(super) fn predict(ctx: &Context, args: PredictArgs) -> Result<()> {
    let start = Instant::now();
    let mut manifest = ctx.manifest("predict", &args, None);
    let raw = read_documents(&args.docs, &mut manifest)?;

    let scores: Vec<BTreeMap<usize, f64>>;
    let vocab: Vocabulary;
    if args.method == Method::Frequency {
        vocab = Vocabulary::from_symbols(
            Vec::<String>::new(),
            raw.iter().flat_map(|d| d.entities.iter().map(|m| m.id.clone())),
        );
        let docs = encode_documents(&raw, &vocab, "docs")?;
        scores = docs.iter().map(frequency_scores).collect();
    } else {
        let model = load_model(args.model.as_ref(), args.method, &mut manifest)?;
        let descriptions = read_descriptions(args.desc.as_ref(), &model.vocab, &mut manifest)?;
        let docs = encode_documents(&raw, &model.vocab, "docs")?;
        let p = &model.params;
        scores = match args.method {
            Method::Kesm => ctx.pool.map(docs.len(), |i| {
                rank_entities(&docs[i], &descriptions, p, &model.bank).into_iter().collect()
            }),
            Method::Pagerank => {
                let alpha = pagerank_alpha(ctx, &args, &model, &descriptions, &mut manifest)?;
                manifest.details = serde_json::json!({ "alpha": alpha });
                ctx.pool
                    .map(docs.len(), |i| {
                        if docs[i].mentions.is_empty() {
                            Ok(BTreeMap::new())
                        } else {
                            pagerank_scores(&docs[i], &descriptions, p, alpha)
                        }
                    })
                    .into_iter()
                    .collect::<kesm_core::Result<_>>()?
            }
            Method::Letor => {
                let Some(path) = &args.letor else {
                    return Err(Error::Usage("--letor is required for --method letor".into()));
                };
                let file: LetorFile = io::read_json(path)?;
                check_version(path, file.format_version)?;
                manifest.input(path)?;
                let ranker = file.ranker;
                if ranker.feature_names != LETOR_FEATURES {
                    return Err(Error::parse(path, 1, "not a LeToR salience model"));
                }
                ctx.pool
                    .map(docs.len(), |i| {
                        letor_features(&docs[i], p)
                            .into_iter()
                            .map(|(e, f)| Ok((e, ranker.score(&f.to_vec())?)))
                            .collect::<kesm_core::Result<BTreeMap<_, _>>>()
                    })
                    .into_iter()
                    .collect::<kesm_core::Result<_>>()?
            }
            Method::Frequency => unreachable!(),
        };
        vocab = model.vocab;
    }

    let mut rows = Vec::new();
    for (doc, s) in raw.iter().zip(&scores) {
        for (rank, (entity, score)) in expand(doc, &vocab, s).into_iter().enumerate() {
            rows.push(Prediction {
                doc_id: doc.doc_id.clone(),
                rank: rank + 1,
                entity,
                score,
            });
        }
    }
    manifest.time("total", start.elapsed());
    let mut outputs = Outputs::new();
    outputs.add(&args.out, format_predictions(&rows).into_bytes());
    finish(outputs, manifest, manifest_path(&args.out))
}

fn pagerank_alpha(
    ctx: &Context,
    args: &PredictArgs,
    model: &Checkpoint,
    descriptions: &DescriptionStore,
    manifest: &mut crate::manifest::Manifest,
) -> Result<f64> {
    match (args.alpha, &args.dev) {
        (Some(a), _) if (0.0..=1.0).contains(&a) => Ok(a),
        (Some(a), _) => Err(Error::Usage(format!("--alpha {a} is outside [0, 1]"))),
        (None, Some(dev)) => {
            let raw = read_documents(dev, manifest)?;
            let docs: Vec<_> = encode_documents(&raw, &model.vocab, "dev")?
                .into_iter()
                .filter(|d| !d.mentions.is_empty())
                .collect();
            let alpha = fit_pagerank_alpha(&ctx.pool, &docs, descriptions, &model.params).map_err(|e| match e {
                kesm_core::Error::NoDevLabels => {
                    Error::Usage(format!("{}: no document has a salient entity", dev.display()))
                }
                e => e.into(),
            })?;
            log::info!("PageRank alpha {alpha} chosen on {}", dev.display());
            Ok(alpha)
        }
        (None, None) => Err(Error::Usage("--method pagerank needs --alpha or --dev".into())),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainLetorArgs {
    /// Checkpoint whose embeddings feed the embedding-vote feature.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

pub(super) fn train_letor(ctx: &Context, args: TrainLetorArgs) -> Result<()> {
    let start = Instant::now();
    let mut config = LinearTrainConfig {
        seed: args.seed,
        ..LinearTrainConfig::default()
    };
    if let Some(l) = args.lambda {
        config.lambda = l;
    }
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    let mut manifest = ctx.manifest("train-letor", &(&args, &config), Some(args.seed));
    let model = Checkpoint::load(&args.model)?;
    manifest.input(&args.model)?;
    let docs = encode_documents(&read_documents(&args.train, &mut manifest)?, &model.vocab, "train")?;
    let pairs = letor_pairs(&docs, &model.params);
    if pairs.is_empty() {
        return Err(Error::Usage(format!(
            "{}: no document has both salient and non-salient entities",
            args.train.display()
        )));
    }
    let names = LETOR_FEATURES.iter().map(|s| s.to_string()).collect();
    let fit = train_linear_pairwise(&pairs, names, &config)?;
    manifest.details = serde_json::json!({
        "pairs": pairs.len(),
        "final_objective": fit.objectives.last(),
    });
    manifest.time("total", start.elapsed());
    let file = LetorFile {
        format_version: FORMAT_VERSION,
        ranker: fit.params,
    };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("in-memory serialization");
    bytes.push(b'\n');
    let mut outputs = Outputs::new();
    outputs.add(&args.out, bytes);
    finish(outputs, manifest, manifest_path(&args.out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use kesm_core::corpus::{encode_document, RawMention};

    #[test]
    fn unknown_entities_keep_their_own_rows() {
        let vocab = Vocabulary::from_symbols(Vec::<String>::new(), ["A"]);
        let raw = RawDocument {
            doc_id: "d".into(),
            words: vec!["w".into(); 4],
            entities: ["X", "A", "Y", "A"]
                .iter()
                .enumerate()
                .map(|(i, id)| RawMention { id: id.to_string(), positions: vec![i as i64] })
                .collect(),
            salient: vec![],
        };
        let (doc, _) = encode_document(&raw, &vocab).unwrap();
        let ranked = expand(&raw, &vocab, &frequency_scores(&doc));
        let ids: Vec<&str> = ranked.iter().map(|(e, _)| e.as_str()).collect();
        // X and Y share Unk's two mentions and tie with A; Unk has the lower index
        assert_eq!(ids, ["X", "Y", "A"]);
    }
}
