//! `tandem embed`: embed corpus passages into a vector file, optionally
//! with an IVF sidecar for approximate search.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use tandem::corpus::split_corpus;
use tandem::dense::VectorIndex;
use tandem::embedder::embed_corpus;

use crate::manifest::{self, RunManifest};
use crate::provider::ProviderSpec;
use crate::store;

#[derive(Args)]
pub struct EmbedArgs {
    /// Index directory from `tandem index`.
    #[arg(long)]
    pub index: PathBuf,

    /// Provider spec: `baseline:dim=D,seed=S[,min-cf=N]`, a `.tsv` file,
    /// or a vector file with precomputed passage vectors.
    #[arg(long)]
    pub provider: String,

    /// Output vector file.
    #[arg(long)]
    pub out: PathBuf,

    /// L2-normalize passage vectors before storing.
    #[arg(long)]
    pub normalize: bool,

    /// Build an IVF sidecar (`<out>.ann`) with this many k-means cells.
    #[arg(long)]
    pub centroids: Option<usize>,

    /// K-means seed for the sidecar.
    #[arg(long, default_value_t = 0)]
    pub ann_seed: u64,
}

pub fn run(args: EmbedArgs) -> anyhow::Result<ExitCode> {
    let spec = ProviderSpec::parse(&args.provider)?;
    let index = store::load_index(&args.index)?;
    let docs = store::load_docs(&store::docs_path(&args.index))?;
    let passages = split_corpus(&docs)?;
    let provider = spec.build(&index)?;

    let n = embed_corpus(provider.as_ref(), &passages, &args.out, args.normalize)?;

    let mut run_manifest = RunManifest::new(
        "embed",
        serde_json::json!({
            "provider": spec.describe(),
            "normalize": args.normalize,
            "window": tandem::defaults::PASSAGE_WINDOW,
            "stride": tandem::defaults::PASSAGE_STRIDE,
            "centroids": args.centroids,
            "ann_seed": args.ann_seed,
        }),
        &[&store::index_path(&args.index), &store::docs_path(&args.index)],
    );
    run_manifest.record(&args.out)?;

    if n == 0 {
        run_manifest.write(&manifest::sidecar_path(&args.out))?;
        eprintln!("warning: corpus produced no passages, vector file is empty");
        return Ok(ExitCode::from(crate::EMPTY_RESULT));
    }

    if let Some(k) = args.centroids {
        let mut vectors = VectorIndex::load(&args.out)?;
        vectors.build_ann(k, args.ann_seed)?;
        let ann = store::ann_path(&args.out);
        vectors.save_ann(&ann)?;
        run_manifest.record(&ann)?;
        println!("built {k}-cell IVF sidecar {}", ann.display());
    }
    run_manifest.write(&manifest::sidecar_path(&args.out))?;

    println!(
        "embedded {n} passages at dim {} -> {}",
        provider.dim(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
