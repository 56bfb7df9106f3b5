//! Embedding provider specs.
//!
//! A spec is either `baseline:dim=D,seed=S[,min-cf=N]`, building the
//! idf-weighted random-projection provider from the lexical index, or a
//! path to precomputed vectors: a `.tsv` file keyed by normalized token
//! text, or a vector file keyed by passage id.

use std::path::PathBuf;

use anyhow::{bail, Context};
use tandem::embedder::{BaselineProjection, EmbeddingProvider, PrecomputedProvider};
use tandem::lexical::LexicalIndex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Baseline { dim: usize, seed: u64, min_cf: u64 },
    Tsv(PathBuf),
    VecFile(PathBuf),
}

impl ProviderSpec {
    pub fn parse(s: &str) -> anyhow::Result<ProviderSpec> {
        if let Some(rest) = s.strip_prefix("baseline:") {
            let mut dim = None;
            let mut seed = 0u64;
            let mut min_cf = tandem::defaults::VOCAB_MIN_OCCURRENCES;
            for part in rest.split(',') {
                let Some((k, v)) = part.split_once('=') else {
                    bail!("bad provider option {part:?}, expected key=value");
                };
                match k {
                    "dim" => dim = Some(v.parse().with_context(|| format!("bad dim {v:?}"))?),
                    "seed" => seed = v.parse().with_context(|| format!("bad seed {v:?}"))?,
                    "min-cf" => {
                        min_cf = v.parse().with_context(|| format!("bad min-cf {v:?}"))?
                    }
                    other => bail!("unknown provider option {other:?}, expected dim|seed|min-cf"),
                }
            }
            let Some(dim) = dim else {
                bail!("baseline provider needs dim, e.g. baseline:dim=128,seed=7");
            };
            return Ok(ProviderSpec::Baseline { dim, seed, min_cf });
        }
        let path = PathBuf::from(s);
        if path.extension().is_some_and(|e| e == "tsv") {
            Ok(ProviderSpec::Tsv(path))
        } else {
            Ok(ProviderSpec::VecFile(path))
        }
    }

    /// Instantiate the provider; `index` feeds the baseline projection.
    pub fn build(&self, index: &LexicalIndex) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderSpec::Baseline { dim, seed, min_cf } => {
                Box::new(BaselineProjection::from_index(index, *dim, *seed, *min_cf)?)
            }
            ProviderSpec::Tsv(path) => Box::new(PrecomputedProvider::from_tsv(path)?),
            ProviderSpec::VecFile(path) => Box::new(PrecomputedProvider::from_vec_file(path)?),
        })
    }

    /// Stable form for manifests and logs.
    pub fn describe(&self) -> String {
        match self {
            ProviderSpec::Baseline { dim, seed, min_cf } => {
                format!("baseline:dim={dim},seed={seed},min-cf={min_cf}")
            }
            ProviderSpec::Tsv(p) => format!("tsv:{}", p.display()),
            ProviderSpec::VecFile(p) => format!("vec:{}", p.display()),
        }
    }
}
