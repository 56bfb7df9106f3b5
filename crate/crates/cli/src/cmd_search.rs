//! `tandem search`: run lexical, semantic, or hybrid retrieval over a
//! query file and write a TREC run.
//!
//! Results are written in the query file's order. Hybrid mode prints the
//! per-arm wall-clock totals, since the two arms run concurrently and
//! their individual costs are what the parallel design saves.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::Args;
use tandem::corpus::{self, NormalizeConfig, Query};
use tandem::dense::{aggregate_to_docs, VectorIndex};
use tandem::embedder::EmbeddingProvider;
use tandem::hybrid::{retrieve_hybrid, HybridConfig};
use tandem::lexical::{Bm25Params, LexicalIndex};
use tandem::{Error, ScoredList};

use crate::manifest;
use crate::provider::ProviderSpec;
use crate::store;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Lexical,
    Semantic,
    Hybrid,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Lexical => "lexical",
            Mode::Semantic => "semantic",
            Mode::Hybrid => "hybrid",
        }
    }
}

#[derive(Args)]
pub struct SearchArgs {
    /// Index directory from `tandem index`.
    #[arg(long)]
    pub index: PathBuf,

    /// Queries TSV: `query_id<TAB>text`.
    #[arg(long)]
    pub queries: PathBuf,

    #[arg(long, value_enum)]
    pub mode: Mode,

    /// TREC run file to write.
    #[arg(long)]
    pub out: PathBuf,

    /// Final result-list depth per query.
    #[arg(long, default_value_t = tandem::defaults::RESULT_DEPTHS[1])]
    pub c: usize,

    /// Vector file (semantic and hybrid modes).
    #[arg(long)]
    pub vectors: Option<PathBuf>,

    /// Embedding provider spec (semantic and hybrid modes).
    #[arg(long)]
    pub provider: Option<String>,

    /// Probe this many IVF cells instead of scanning exactly; needs an
    /// `.ann` sidecar next to the vector file.
    #[arg(long)]
    pub n_probe: Option<usize>,

    /// Passages fetched by the dense arm before document aggregation.
    #[arg(long, default_value_t = tandem::defaults::PASSAGE_K)]
    pub passage_k: usize,

    /// Feedback documents for the merge's relevance model.
    #[arg(long, default_value_t = tandem::defaults::FB_DOCS)]
    pub fb_docs: usize,

    /// Expansion terms kept in the relevance model.
    #[arg(long, default_value_t = tandem::defaults::FB_TERMS)]
    pub fb_terms: usize,

    /// RM3 feedback interpolation weight.
    #[arg(long, default_value_t = tandem::defaults::RM3_ALPHA)]
    pub alpha: f64,

    /// Dirichlet smoothing mass.
    #[arg(long, default_value_t = tandem::defaults::DIRICHLET_MU)]
    pub mu: f64,

    /// BM25 term-frequency saturation.
    #[arg(long, default_value_t = tandem::defaults::BM25_K1)]
    pub k1: f64,

    /// BM25 length normalization.
    #[arg(long, default_value_t = tandem::defaults::BM25_B)]
    pub b: f64,

    /// Run tag for the TREC output (defaults to the mode name).
    #[arg(long)]
    pub tag: Option<String>,
}

/// Accumulated arm timings and degraded-query counters.
#[derive(Default)]
struct BatchStats {
    lexical: Duration,
    semantic: Duration,
    merge: Duration,
    fallbacks: usize,
    empty_semantic: usize,
}

pub fn run(args: SearchArgs) -> anyhow::Result<ExitCode> {
    let index = store::load_index(&args.index)?;
    let queries = corpus::read_queries_tsv(&args.queries, &NormalizeConfig::default())?;
    if queries.is_empty() {
        eprintln!("warning: {} holds no queries", args.queries.display());
        return Ok(ExitCode::from(crate::EMPTY_RESULT));
    }
    let mut seen = HashSet::new();
    for q in &queries {
        if !seen.insert(q.query_id.as_str()) {
            bail!(
                "duplicate query id {:?} in {}",
                q.query_id,
                args.queries.display()
            );
        }
    }
    if args.c == 0 {
        bail!("--c must be > 0");
    }

    let bm25 = Bm25Params {
        k1: args.k1,
        b: args.b,
    };
    let started = Instant::now();
    let (results, stats) = match args.mode {
        Mode::Lexical => search_lexical(&index, &queries, args.c, &bm25),
        Mode::Semantic => search_semantic(&args, &index, &queries)?,
        Mode::Hybrid => search_hybrid(&args, &index, &queries, bm25)?,
    };
    let wall = started.elapsed();

    let tag = args.tag.clone().unwrap_or_else(|| args.mode.name().to_string());
    let lines = write_run(&args.out, &results, &tag)?;

    let index_path = store::index_path(&args.index);
    let mut inputs: Vec<&std::path::Path> = vec![&args.queries, &index_path];
    if let Some(v) = &args.vectors {
        inputs.push(v);
    }
    manifest::write_for(
        "search",
        serde_json::json!({
            "mode": args.mode.name(),
            "c": args.c,
            "passage_k": args.passage_k,
            "fb_docs": args.fb_docs,
            "fb_terms": args.fb_terms,
            "alpha": args.alpha,
            "mu": args.mu,
            "k1": args.k1,
            "b": args.b,
            "n_probe": args.n_probe,
            "provider": args.provider,
            "tag": tag,
        }),
        &inputs,
        &args.out,
    )?;

    if stats.fallbacks > 0 {
        eprintln!(
            "warning: {} query(ies) had no lexical results; semantic order used as-is",
            stats.fallbacks
        );
    }
    if stats.empty_semantic > 0 {
        eprintln!(
            "warning: semantic arm empty for {} query(ies); lexical results only",
            stats.empty_semantic
        );
    }

    println!(
        "{} queries, {} result lines -> {}",
        queries.len(),
        lines,
        args.out.display()
    );
    match args.mode {
        Mode::Lexical => println!("lexical arm: {:.1} ms", ms(stats.lexical)),
        Mode::Semantic => println!("semantic arm: {:.1} ms", ms(stats.semantic)),
        Mode::Hybrid => println!(
            "arm totals: lexical {:.1} ms, semantic {:.1} ms, merge {:.1} ms; wall {:.1} ms",
            ms(stats.lexical),
            ms(stats.semantic),
            ms(stats.merge),
            ms(wall)
        ),
    }

    if lines == 0 {
        eprintln!("warning: no query produced any result");
        return Ok(ExitCode::from(crate::EMPTY_RESULT));
    }
    Ok(ExitCode::SUCCESS)
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn search_lexical(
    index: &LexicalIndex,
    queries: &[Query],
    c: usize,
    bm25: &Bm25Params,
) -> (Vec<(String, ScoredList)>, BatchStats) {
    let mut stats = BatchStats::default();
    let t0 = Instant::now();
    let results = queries
        .iter()
        .map(|q| (q.query_id.clone(), index.search(q, c, bm25)))
        .collect();
    stats.lexical = t0.elapsed();
    (results, stats)
}

/// Load the vector file named by `--vectors`, plus its `.ann` sidecar
/// when present; `--n-probe` without a sidecar is an input error.
fn load_vectors(args: &SearchArgs) -> anyhow::Result<VectorIndex> {
    let Some(path) = &args.vectors else {
        bail!("--vectors is required for {} mode", args.mode.name());
    };
    let mut vectors = VectorIndex::load(path)?;
    let ann = store::ann_path(path);
    if ann.exists() {
        vectors.load_ann(&ann)?;
    }
    if args.n_probe.is_some() && vectors.ann().is_none() {
        bail!(
            "--n-probe given but {} does not exist; rebuild with `tandem embed --centroids`",
            ann.display()
        );
    }
    Ok(vectors)
}

fn build_provider(
    args: &SearchArgs,
    index: &LexicalIndex,
) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
    let Some(spec) = &args.provider else {
        bail!("--provider is required for {} mode", args.mode.name());
    };
    ProviderSpec::parse(spec)?
        .build(index)
        .with_context(|| format!("building provider {spec:?}"))
}

fn search_semantic(
    args: &SearchArgs,
    index: &LexicalIndex,
    queries: &[Query],
) -> anyhow::Result<(Vec<(String, ScoredList)>, BatchStats)> {
    let vectors = load_vectors(args)?;
    let provider = build_provider(args, index)?;
    let mut stats = BatchStats::default();
    let mut results = Vec::with_capacity(queries.len());
    let t0 = Instant::now();
    for q in queries {
        if vectors.is_empty() {
            stats.empty_semantic += 1;
            results.push((q.query_id.clone(), ScoredList::default()));
            continue;
        }
        let qvec = match provider.embed_query(&q.tokens) {
            Ok(v) => v,
            Err(Error::UnknownEmbeddingKey(_)) => {
                stats.empty_semantic += 1;
                results.push((q.query_id.clone(), ScoredList::default()));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let hits = match args.n_probe {
            Some(p) => vectors.knn_approx(&qvec, args.passage_k, p)?,
            None => vectors.knn_exact(&qvec, args.passage_k)?,
        };
        results.push((q.query_id.clone(), aggregate_to_docs(&hits, args.c)));
    }
    stats.semantic = t0.elapsed();
    Ok((results, stats))
}

fn search_hybrid(
    args: &SearchArgs,
    index: &LexicalIndex,
    queries: &[Query],
    bm25: Bm25Params,
) -> anyhow::Result<(Vec<(String, ScoredList)>, BatchStats)> {
    let vectors = load_vectors(args)?;
    let provider = build_provider(args, index)?;
    let cfg = HybridConfig {
        c: args.c,
        passage_k: args.passage_k,
        fb_docs: args.fb_docs,
        fb_terms: args.fb_terms,
        alpha: args.alpha,
        mu: args.mu,
        bm25,
        n_probe: args.n_probe,
    };
    cfg.validate()?;
    let mut stats = BatchStats::default();
    let mut results = Vec::with_capacity(queries.len());
    for q in queries {
        let outcome = retrieve_hybrid(q, index, &vectors, provider.as_ref(), &cfg)?;
        stats.lexical += outcome.lexical_time;
        stats.semantic += outcome.semantic_time;
        stats.merge += outcome.merge_time;
        stats.fallbacks += usize::from(outcome.used_fallback);
        stats.empty_semantic += usize::from(outcome.semantic_empty);
        results.push((q.query_id.clone(), outcome.list));
    }
    Ok((results, stats))
}

/// Write TREC run lines in the given query order, ranks from 1.
fn write_run(
    path: &std::path::Path,
    results: &[(String, ScoredList)],
    tag: &str,
) -> anyhow::Result<usize> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let mut lines = 0usize;
    for (qid, list) in results {
        for (rank, entry) in list.iter().enumerate() {
            writeln!(w, "{qid} Q0 {} {} {:.6} {tag}", entry.doc_id, rank + 1, entry.score)?;
            lines += 1;
        }
    }
    w.flush()?;
    Ok(lines)
}
