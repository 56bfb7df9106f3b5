//! `tandem index`: tokenize a corpus file and build the index directory.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Args;
use tandem::corpus::{self, CorpusFormat, NormalizeConfig};
use tandem::lexical::LexicalIndex;

use crate::manifest::RunManifest;
use crate::store;

#[derive(Args)]
pub struct IndexArgs {
    /// Corpus file to index.
    #[arg(long)]
    pub corpus: PathBuf,

    /// Corpus file format: jsonl | trec-sgml.
    #[arg(long, default_value = "jsonl")]
    pub format: String,

    /// Directory for index.bin, docs.jsonl, and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: IndexArgs) -> anyhow::Result<ExitCode> {
    let format = CorpusFormat::parse(&args.format)?;
    let cfg = NormalizeConfig::default();
    let docs = corpus::ingest(&args.corpus, format, &cfg)?;
    if docs.is_empty() {
        eprintln!(
            "warning: {} holds no documents, nothing indexed",
            args.corpus.display()
        );
        return Ok(ExitCode::from(crate::EMPTY_RESULT));
    }
    let index = LexicalIndex::build(&docs)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let index_path = store::index_path(&args.out);
    let docs_path = store::docs_path(&args.out);
    index.save(&index_path)?;
    store::save_docs(&docs, &docs_path)?;

    let mut manifest = RunManifest::new(
        "index",
        serde_json::json!({
            "format": args.format,
            "stemmer": "porter",
            "stopwords": "builtin-en",
        }),
        &[&args.corpus],
    );
    manifest.record(&index_path)?;
    manifest.record(&index_path.with_extension("bin.json"))?;
    manifest.record(&docs_path)?;
    manifest.write(&store::manifest_path(&args.out))?;

    let stats = index.stats();
    println!(
        "indexed {} documents, {} terms, {} tokens (avg doc length {:.1}) -> {}",
        stats.n_docs,
        stats.n_terms,
        stats.total_tokens,
        stats.avg_doc_len,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
