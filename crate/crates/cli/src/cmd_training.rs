//! `tandem gen-training`: mine n-gram queries from the indexed corpus and
//! write weak-supervision training shards.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::Args;
use tandem::corpus::split_corpus;
use tandem::weaksup::{self, GenConfig, PassagePool, PassageSelect};

use crate::manifest::RunManifest;
use crate::store;

#[derive(Args)]
pub struct TrainingArgs {
    /// Index directory from `tandem index`.
    #[arg(long)]
    pub index: PathBuf,

    /// Directory for pair shards and manifests.
    #[arg(long)]
    pub out: PathBuf,

    /// Pipeline RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Negatives per positive pair.
    #[arg(long, default_value_t = tandem::defaults::NEGATIVE_RATIO)]
    pub neg_ratio: f64,

    /// Pairs per output shard.
    #[arg(long, default_value_t = 100_000)]
    pub shard_size: usize,

    /// Document-frequency floor for mined n-grams.
    #[arg(long, default_value_t = tandem::defaults::MINE_MIN_DF)]
    pub min_df: usize,

    /// BM25 result floor for mined queries.
    #[arg(long, default_value_t = tandem::defaults::MINE_MIN_RESULTS)]
    pub min_results: usize,

    /// Collection-frequency floor for perturbation replacement terms.
    #[arg(long, default_value_t = 1)]
    pub vocab_min_cf: u64,

    /// Positive passage selection: document-order | bm25-passage-score.
    #[arg(long, default_value = "document-order")]
    pub passage_select: String,
}

pub fn run(args: TrainingArgs) -> anyhow::Result<ExitCode> {
    let passage_select: PassageSelect =
        serde_json::from_value(serde_json::Value::String(args.passage_select.clone())).map_err(
            |_| {
                anyhow!(
                    "unknown passage-select {:?}, expected document-order|bm25-passage-score",
                    args.passage_select
                )
            },
        )?;

    let index = store::load_index(&args.index)?;
    let docs = store::load_docs(&store::docs_path(&args.index))?;
    let pool = PassagePool::new(split_corpus(&docs)?);

    // The replacement vocabulary must be ordered, or the perturbation
    // draws would depend on map iteration order.
    let mut vocab: Vec<String> = index
        .terms()
        .filter(|t| index.cf(t) >= args.vocab_min_cf)
        .map(str::to_string)
        .collect();
    vocab.sort_unstable();

    let cfg = GenConfig {
        min_df: args.min_df,
        min_results: args.min_results,
        negative_ratio: args.neg_ratio,
        seed: args.seed,
        shard_size: args.shard_size,
        passage_select,
        ..GenConfig::default()
    };
    let gen = weaksup::generate(&docs, &index, &pool, &vocab, &cfg, &args.out)?;

    let mut manifest = RunManifest::new(
        "gen-training",
        serde_json::json!({
            "gen": serde_json::to_value(&cfg)?,
            "vocab_min_cf": args.vocab_min_cf,
            "vocab_size": vocab.len(),
        }),
        &[&store::index_path(&args.index), &store::docs_path(&args.index)],
    );
    for shard in &gen.shards {
        manifest.record(&args.out.join(&shard.file))?;
    }
    manifest.record(&args.out.join("manifest.json"))?;
    manifest.write(&args.out.join("run-manifest.json"))?;

    if gen.queries == 0 {
        eprintln!("warning: no n-gram query passed the df/result filters");
        return Ok(ExitCode::from(crate::EMPTY_RESULT));
    }
    println!(
        "mined {} queries ({} bi-gram, {} tri-gram); {} positives + {} negatives = {} pairs in {} shard(s) -> {}",
        gen.queries,
        gen.bigram_queries,
        gen.trigram_queries,
        gen.positives,
        gen.negatives,
        gen.total_pairs,
        gen.shards.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
