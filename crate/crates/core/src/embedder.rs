//! Embedding providers for queries and passages, plus the training-pair
//! loss used by external trainers.
//!
//! Two providers are included. [`PrecomputedProvider`] serves vectors
//! trained elsewhere, looked up by the space-joined normalized token
//! string. [`BaselineProjection`] needs no training at all: it embeds a
//! token list as the idf-weighted sum of fixed random rows, one per
//! vocabulary term, so the whole pipeline runs end to end
//! deterministically. Neither is a neural model; the trait is the seam
//! where one would plug in.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::dense::VectorIndex;
use crate::lexical::LexicalIndex;
use crate::{Error, Result};

/// FNV-1a over bytes; used to derive stable per-key RNG seeds.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A query/passage pair with its weak-supervision score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub query: Vec<String>,
    pub passage: Vec<String>,
    pub label: u8,
    pub score: f64,
}

impl TrainingPair {
    /// Build a pair, enforcing that positive labels carry positive scores
    /// and negative labels carry score zero.
    pub fn new(query: Vec<String>, passage: Vec<String>, label: u8, score: f64) -> Result<Self> {
        if label > 1 {
            return Err(Error::invalid_param("label", "must be 0 or 1"));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid_param("score", "must be within [0, 1]"));
        }
        if label == 1 && score <= 0.0 {
            return Err(Error::invalid_param("score", "label 1 requires score > 0"));
        }
        if label == 0 && score != 0.0 {
            return Err(Error::invalid_param("score", "label 0 requires score == 0"));
        }
        Ok(TrainingPair {
            query,
            passage,
            label,
            score,
        })
    }
}

/// Maps token lists to fixed-dimension vectors. Implementations are
/// immutable once built, so embedding is pure and safe to run
/// concurrently. Empty token lists embed to the zero vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_query(&self, tokens: &[String]) -> Result<Vec<f32>>;
    fn embed_passage(&self, tokens: &[String]) -> Result<Vec<f32>>;
}

/// Training-free embedder: each vocabulary term owns a fixed random row,
/// and a token list embeds as the sum of `idf(term) × row(term)` over
/// occurrences (out-of-vocabulary terms contribute nothing).
///
/// Rows are generated from a ChaCha stream seeded by
/// `seed ^ fnv1a64(term)`, so a term's row depends only on the seed and
/// the term itself, never on vocabulary order. Components are uniform in
/// [-1, 1) scaled by sqrt(3/dim), giving each row unit expected squared
/// norm.
#[derive(Debug)]
pub struct BaselineProjection {
    dim: usize,
    seed: u64,
    rows: HashMap<String, (f32, Vec<f32>)>,
}

impl BaselineProjection {
    /// Build from an index: the vocabulary is every term with collection
    /// frequency at least `min_cf`, weighted by the index's idf.
    pub fn from_index(
        index: &LexicalIndex,
        dim: usize,
        seed: u64,
        min_cf: u64,
    ) -> Result<BaselineProjection> {
        if dim == 0 {
            return Err(Error::invalid_param("dim", "must be > 0"));
        }
        let scale = (3.0 / dim as f64).sqrt() as f32;
        let mut rows = HashMap::new();
        for term in index.terms() {
            if index.cf(term) < min_cf {
                continue;
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(term.as_bytes()));
            let row: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0) * scale).collect();
            rows.insert(term.to_string(), (index.idf(term) as f32, row));
        }
        if rows.is_empty() {
            return Err(Error::DegenerateModel(format!(
                "no term reaches collection frequency {min_cf}; lower the vocabulary threshold"
            )));
        }
        Ok(BaselineProjection { dim, seed, rows })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab_size(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.rows.contains_key(term)
    }

    /// The vocabulary, sorted, for callers that need a stable term pool.
    pub fn vocab(&self) -> Vec<String> {
        let mut v: Vec<String> = self.rows.keys().cloned().collect();
        v.sort_unstable();
        v
    }

    fn embed(&self, tokens: &[String]) -> Vec<f32> {
        let mut out = vec![0.0f32; self.dim];
        for t in tokens {
            if let Some((w, row)) = self.rows.get(t.as_str()) {
                for (o, r) in out.iter_mut().zip(row) {
                    *o += w * r;
                }
            }
        }
        out
    }
}

impl EmbeddingProvider for BaselineProjection {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_query(&self, tokens: &[String]) -> Result<Vec<f32>> {
        Ok(self.embed(tokens))
    }

    fn embed_passage(&self, tokens: &[String]) -> Result<Vec<f32>> {
        Ok(self.embed(tokens))
    }
}

/// Serves externally trained vectors. The lookup key is the token list
/// joined with single spaces; a missing key is an error so silent
/// zero-vectors cannot leak into retrieval.
#[derive(Debug)]
pub struct PrecomputedProvider {
    dim: usize,
    map: HashMap<String, Vec<f32>>,
}

impl PrecomputedProvider {
    pub fn new(dim: usize, map: HashMap<String, Vec<f32>>) -> Result<PrecomputedProvider> {
        if dim == 0 {
            return Err(Error::invalid_param("dim", "must be > 0"));
        }
        for (k, v) in &map {
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if k.is_empty() {
                return Err(Error::invalid_param("key", "must be non-empty"));
            }
        }
        Ok(PrecomputedProvider { dim, map })
    }

    /// Parse `key<TAB>f1 f2 ... fD` lines. The first row fixes the
    /// dimension; blank lines are skipped.
    pub fn from_tsv(path: &Path) -> Result<PrecomputedProvider> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut map: HashMap<String, Vec<f32>> = HashMap::new();
        let mut dim = 0usize;
        for (no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = no + 1;
            if line.trim().is_empty() {
                continue;
            }
            let Some((key, rest)) = line.split_once('\t') else {
                return Err(Error::parse(path, lineno, "expected key<TAB>values"));
            };
            let vals: Vec<f32> = rest
                .split_whitespace()
                .map(|s| {
                    s.parse::<f32>()
                        .map_err(|e| Error::parse(path, lineno, format!("bad float {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.is_empty() {
                return Err(Error::parse(path, lineno, "no vector components"));
            }
            if dim == 0 {
                dim = vals.len();
            } else if vals.len() != dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {dim} components, got {}", vals.len()),
                ));
            }
            if map.insert(key.to_string(), vals).is_some() {
                return Err(Error::parse(path, lineno, format!("duplicate key {key:?}")));
            }
        }
        if map.is_empty() {
            return Err(Error::file_format(path, "no embeddings in file"));
        }
        PrecomputedProvider::new(dim, map)
    }

    /// Load a vector file written by the dense module, using each
    /// record's passage id as the lookup key.
    pub fn from_vec_file(path: &Path) -> Result<PrecomputedProvider> {
        let idx = VectorIndex::load(path)?;
        if idx.is_empty() {
            return Err(Error::file_format(path, "no embeddings in file"));
        }
        let mut map = HashMap::with_capacity(idx.len());
        for i in 0..idx.len() {
            map.insert(idx.passage_id(i).to_string(), idx.vector(i).to_vec());
        }
        PrecomputedProvider::new(idx.dim(), map)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn lookup(&self, tokens: &[String]) -> Result<Vec<f32>> {
        if tokens.is_empty() {
            return Ok(vec![0.0; self.dim]);
        }
        let key = tokens.join(" ");
        self.map
            .get(&key)
            .cloned()
            .ok_or(Error::UnknownEmbeddingKey(key))
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_query(&self, tokens: &[String]) -> Result<Vec<f32>> {
        self.lookup(tokens)
    }

    fn embed_passage(&self, tokens: &[String]) -> Result<Vec<f32>> {
        self.lookup(tokens)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` in the overflow-free form.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_loss_inputs(label: u8, target_score: f64, dot: f64) -> Result<()> {
    if label > 1 {
        return Err(Error::invalid_param("label", "must be 0 or 1"));
    }
    if !target_score.is_finite() || !(0.0..=1.0).contains(&target_score) {
        return Err(Error::invalid_param("target_score", "must be finite in [0, 1]"));
    }
    if !dot.is_finite() {
        return Err(Error::invalid_param("dot", "must be finite"));
    }
    Ok(())
}

/// Training loss for one pair: binary cross-entropy of the label against
/// `sigmoid(dot)`, plus the squared error of `dot` against the target
/// score. The cross-entropy is evaluated through softplus so no sigmoid
/// input can overflow; the result is finite for all finite `dot`.
pub fn pair_loss(label: u8, target_score: f64, dot: f64) -> Result<f64> {
    check_loss_inputs(label, target_score, dot)?;
    let ce = softplus(dot) - label as f64 * dot;
    let mse = (target_score - dot) * (target_score - dot);
    Ok(ce + mse)
}

/// Derivative of [`pair_loss`] with respect to `dot`:
/// `sigmoid(dot) − label + 2·(dot − target_score)`.
pub fn pair_loss_grad(label: u8, target_score: f64, dot: f64) -> Result<f64> {
    check_loss_inputs(label, target_score, dot)?;
    Ok(sigmoid(dot) - label as f64 + 2.0 * (dot - target_score))
}

/// Embed every passage and write a vector file in the dense-module
/// format. Returns the record count. Embedding runs in parallel; the
/// write is sequential, so re-running with the same inputs produces a
/// byte-identical file. With `normalize` set, vectors are unit-normalized
/// at write time (inner product then equals cosine).
pub fn embed_corpus(
    provider: &dyn EmbeddingProvider,
    passages: &[Passage],
    out: &Path,
    normalize: bool,
) -> Result<usize> {
    let vectors = crate::parallel::map_ordered(passages, |p| provider.embed_passage(&p.tokens));
    let mut idx = VectorIndex::new(provider.dim())?;
    for (i, (p, v)) in passages.iter().zip(vectors).enumerate() {
        let v = v.map_err(|e| {
            Error::invalid_param("passage", format!("record {i} ({}): {e}", p.passage_id()))
        })?;
        idx.add(&p.passage_id(), &p.doc_id, &v, normalize).map_err(|e| {
            Error::invalid_param("passage", format!("record {i} ({}): {e}", p.passage_id()))
        })?;
    }
    idx.save(out)?;
    Ok(passages.len())
}
