//! Weak-supervision training-data pipeline: mine n-gram queries from the
//! corpus, pair them with passages they fully match, expand each pair
//! with scored partial-match perturbations, and sample non-relevant
//! pairs, writing everything as JSONL shards for external trainers.
//!
//! Every stage is deterministic for a fixed (corpus, seed, config):
//! per-query randomness comes from a generator seeded by the global seed
//! and the query terms, so results do not depend on worker scheduling or
//! query order.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Passage};
use crate::defaults;
use crate::embedder::{fnv1a64, TrainingPair};
use crate::lexical::{Bm25Params, LexicalIndex};
use crate::parallel;
use crate::{Error, Result};

/// Separator for n-gram hash keys; tokens never contain control bytes.
const NGRAM_SEP: char = '\u{1}';

/// A mined query: a contiguous bi- or tri-gram that survived both the
/// document-frequency and the result-count filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedQuery {
    pub terms: Vec<String>,
    /// Documents containing the exact contiguous n-gram.
    pub df: u32,
    /// Documents matching at least one term (the BM25 result count).
    pub bm25_result_count: u32,
}

/// How to pick a document's passages when more than `per_doc` fully
/// match the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassageSelect {
    /// First `per_doc` matches in document order.
    DocumentOrder,
    /// Top `per_doc` by a passage-level BM25 score, ties in document order.
    Bm25PassageScore,
}

/// Pipeline parameters; the defaults mirror the engine's config table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// N-gram must occur in at least this many documents.
    pub min_df: usize,
    /// Query must have at least this many BM25 results.
    pub min_results: usize,
    /// BM25 depth for positive-pair document retrieval.
    pub top_docs: usize,
    /// Passages kept per retrieved document.
    pub per_doc: usize,
    /// Negatives per positive pair.
    pub negative_ratio: f64,
    pub seed: u64,
    /// Pairs per output shard.
    pub shard_size: usize,
    pub passage_select: PassageSelect,
    pub bm25: Bm25Params,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            min_df: defaults::MINE_MIN_DF,
            min_results: defaults::MINE_MIN_RESULTS,
            top_docs: defaults::PAIR_TOP_DOCS,
            per_doc: defaults::PAIR_PER_DOC,
            negative_ratio: defaults::NEGATIVE_RATIO,
            seed: 0,
            shard_size: 100_000,
            passage_select: PassageSelect::DocumentOrder,
            bm25: Bm25Params::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_df == 0 {
            return Err(Error::invalid_param("min_df", "must be ≥ 1"));
        }
        if self.top_docs == 0 || self.per_doc == 0 {
            return Err(Error::invalid_param("top_docs/per_doc", "must be ≥ 1"));
        }
        if !self.negative_ratio.is_finite() || self.negative_ratio < 0.0 {
            return Err(Error::invalid_param("negative_ratio", "must be ≥ 0"));
        }
        if self.shard_size == 0 {
            return Err(Error::invalid_param("shard_size", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// The corpus's passages, indexed by position and by document.
#[derive(Debug)]
pub struct PassagePool {
    passages: Vec<Passage>,
    by_doc: HashMap<String, Vec<usize>>,
    avg_len: f64,
}

impl PassagePool {
    pub fn new(passages: Vec<Passage>) -> PassagePool {
        let mut by_doc: HashMap<String, Vec<usize>> = HashMap::new();
        let mut total = 0usize;
        for (i, p) in passages.iter().enumerate() {
            by_doc.entry(p.doc_id.clone()).or_default().push(i);
            total += p.tokens.len();
        }
        for ids in by_doc.values_mut() {
            ids.sort_by_key(|&i| passages[i].ordinal);
        }
        let avg_len = if passages.is_empty() {
            0.0
        } else {
            total as f64 / passages.len() as f64
        };
        PassagePool {
            passages,
            by_doc,
            avg_len,
        }
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn passage(&self, i: usize) -> &Passage {
        &self.passages[i]
    }

    /// A document's passage positions in ordinal order; empty for unknown
    /// documents.
    pub fn doc_passages(&self, doc_id: &str) -> &[usize] {
        self.by_doc.get(doc_id).map_or(&[], |v| v.as_slice())
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }
}

fn contains_all(tokens: &[String], terms: &[String]) -> bool {
    terms.iter().all(|t| tokens.contains(t))
}

fn all_distinct(window: &[String]) -> bool {
    match window.len() {
        2 => window[0] != window[1],
        3 => window[0] != window[1] && window[0] != window[2] && window[1] != window[2],
        _ => false,
    }
}

/// Enumerate contiguous bi- and tri-grams with distinct terms, keep those
/// occurring in at least `min_df` documents, then keep those whose BM25
/// result count reaches `min_results`. Output is lexicographic by terms.
pub fn mine_queries(
    docs: &[Document],
    index: &LexicalIndex,
    cfg: &GenConfig,
) -> Result<Vec<MinedQuery>> {
    cfg.validate()?;
    // Per-document distinct n-grams, merged into document-frequency counts.
    let per_doc: Vec<HashSet<String>> = parallel::map_ordered(docs, |doc| {
        let mut seen = HashSet::new();
        for width in [2usize, 3] {
            for window in doc.tokens.windows(width) {
                if all_distinct(window) {
                    let mut key = String::new();
                    for (i, t) in window.iter().enumerate() {
                        if i > 0 {
                            key.push(NGRAM_SEP);
                        }
                        key.push_str(t);
                    }
                    seen.insert(key);
                }
            }
        }
        seen
    });
    let mut df_count: HashMap<String, u32> = HashMap::new();
    for seen in per_doc {
        for key in seen {
            *df_count.entry(key).or_insert(0) += 1;
        }
    }

    let mut candidates: Vec<(Vec<String>, u32)> = df_count
        .into_iter()
        .filter(|&(_, df)| df as usize >= cfg.min_df)
        .map(|(key, df)| {
            let terms: Vec<String> = key.split(NGRAM_SEP).map(str::to_string).collect();
            (terms, df)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.cmp(&b.0));

    let counted: Vec<Option<MinedQuery>> = parallel::map_ordered(&candidates, |(terms, df)| {
        let mut matched: HashSet<u32> = HashSet::new();
        for t in terms {
            for &(d, _) in index.term_doc_indices(t) {
                matched.insert(d);
            }
        }
        if matched.len() < cfg.min_results {
            return None;
        }
        Some(MinedQuery {
            terms: terms.clone(),
            df: *df,
            bm25_result_count: matched.len() as u32,
        })
    });
    Ok(counted.into_iter().flatten().collect())
}

fn passage_bm25(
    index: &LexicalIndex,
    terms: &[String],
    passage: &Passage,
    avg_len: f64,
    params: &Bm25Params,
) -> f64 {
    let len = passage.tokens.len() as f64;
    let norm = 1.0 - params.b + params.b * len / avg_len;
    terms
        .iter()
        .map(|t| {
            let tf = passage.tokens.iter().filter(|x| *x == t).count() as f64;
            index.idf(t) * (tf * (params.k1 + 1.0)) / (tf + params.k1 * norm)
        })
        .sum()
}

/// Retrieve the query's top documents with BM25 and pick up to `per_doc`
/// passages from each that contain every query term. Each returned
/// passage forms one relevant (query, passage) pair.
pub fn positive_pairs<'a>(
    query: &MinedQuery,
    index: &LexicalIndex,
    pool: &'a PassagePool,
    cfg: &GenConfig,
) -> Vec<&'a Passage> {
    let q = crate::corpus::Query::from_tokens("mined", query.terms.clone());
    let list = index.search(&q, cfg.top_docs, &cfg.bm25);
    let mut out = Vec::new();
    for doc_id in list.doc_ids() {
        let mut matches: Vec<usize> = pool
            .doc_passages(doc_id)
            .iter()
            .copied()
            .filter(|&i| contains_all(&pool.passage(i).tokens, &query.terms))
            .collect();
        if let PassageSelect::Bm25PassageScore = cfg.passage_select {
            let scores: Vec<f64> = matches
                .iter()
                .map(|&i| passage_bm25(index, &query.terms, pool.passage(i), pool.avg_len(), &cfg.bm25))
                .collect();
            let mut order: Vec<usize> = (0..matches.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(matches[a].cmp(&matches[b])));
            matches = order.into_iter().map(|j| matches[j]).collect();
        }
        out.extend(matches.into_iter().take(cfg.per_doc).map(|i| pool.passage(i)));
    }
    out
}

fn replace_term(tokens: &[String], from: &str, to: &str) -> Vec<String> {
    tokens
        .iter()
        .map(|t| if t == from { to.to_string() } else { t.clone() })
        .collect()
}

fn draw_replacement(rng: &mut impl Rng, eligible: &[&String]) -> String {
    eligible[rng.gen_range(0..eligible.len())].clone()
}

/// Expand one full-match pair into its scored variants: the full match
/// plus partial matches where one (and for tri-grams, two) query terms
/// are replaced throughout the passage by random vocabulary terms. A
/// bi-gram yields 3 pairs with scores {1.0, 0.6, 0.6}; a tri-gram yields
/// 7 with scores {1.0, 0.65 ×3, 0.55 ×3}. All carry label 1.
pub fn perturb(
    query_terms: &[String],
    passage: &[String],
    vocab: &[String],
    rng: &mut impl Rng,
) -> Result<Vec<TrainingPair>> {
    if !(2..=3).contains(&query_terms.len()) || !all_distinct(query_terms) {
        return Err(Error::invalid_param(
            "query_terms",
            "need 2 or 3 distinct terms",
        ));
    }
    if !contains_all(passage, query_terms) {
        return Err(Error::invalid_param(
            "passage",
            "must contain every query term",
        ));
    }
    let eligible: Vec<&String> = vocab
        .iter()
        .filter(|v| !query_terms.contains(v))
        .collect();
    if eligible.is_empty() {
        return Err(Error::DegenerateModel(
            "replacement vocabulary has no term outside the query".to_string(),
        ));
    }

    let q = query_terms.to_vec();
    let mut pairs = Vec::with_capacity(if q.len() == 2 { 3 } else { 7 });
    pairs.push(TrainingPair::new(
        q.clone(),
        passage.to_vec(),
        1,
        defaults::SCORE_FULL,
    )?);

    let single_score = if q.len() == 2 {
        defaults::SCORE_BI_SINGLE
    } else {
        defaults::SCORE_TRI_DOUBLE
    };
    for term in query_terms {
        let repl = draw_replacement(rng, &eligible);
        pairs.push(TrainingPair::new(
            q.clone(),
            replace_term(passage, term, &repl),
            1,
            single_score,
        )?);
    }
    if q.len() == 3 {
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let ra = draw_replacement(rng, &eligible);
            let rb = draw_replacement(rng, &eligible);
            let once = replace_term(passage, &query_terms[a], &ra);
            pairs.push(TrainingPair::new(
                q.clone(),
                replace_term(&once, &query_terms[b], &rb),
                1,
                defaults::SCORE_TRI_SINGLE,
            )?);
        }
    }
    Ok(pairs)
}

/// Sample `count` non-relevant pairs uniformly over (query, passage),
/// rejecting passages that contain every term of the drawn query. All
/// carry label 0 and score 0.
pub fn negative_pairs(
    queries: &[MinedQuery],
    pool: &PassagePool,
    count: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    if queries.is_empty() || pool.is_empty() {
        return Err(Error::invalid_param(
            "queries/pool",
            "need at least one query and one passage",
        ));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(b"negative-pairs"));
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let budget = 1000 + count.saturating_mul(100);
    while out.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::DegenerateModel(format!(
                "could not find {count} non-matching pairs in {budget} draws"
            )));
        }
        let q = &queries[rng.gen_range(0..queries.len())];
        let p = pool.passage(rng.gen_range(0..pool.len()));
        if contains_all(&p.tokens, &q.terms) {
            continue;
        }
        out.push(TrainingPair::new(q.terms.clone(), p.tokens.clone(), 0, 0.0)?);
    }
    Ok(out)
}

/// One output shard's name and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardInfo {
    pub file: String,
    pub pairs: usize,
}

/// Summary of a generation run, also written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenManifest {
    pub queries: usize,
    pub bigram_queries: usize,
    pub trigram_queries: usize,
    pub positives: usize,
    pub negatives: usize,
    pub total_pairs: usize,
    pub config_hash: String,
    pub shards: Vec<ShardInfo>,
}

/// Run the whole pipeline and write JSONL shards plus `manifest.json`
/// into `out_dir`. Positives come first in mined-query order, negatives
/// after; a fixed (corpus, seed, config) reproduces the files byte for
/// byte. `vocab` supplies the perturbation replacement terms.
pub fn generate(
    docs: &[Document],
    index: &LexicalIndex,
    pool: &PassagePool,
    vocab: &[String],
    cfg: &GenConfig,
    out_dir: &Path,
) -> Result<GenManifest> {
    cfg.validate()?;
    let mined = mine_queries(docs, index, cfg)?;

    // Each query gets a generator seeded by its own terms, so the output
    // is identical however the queries are scheduled.
    let per_query: Vec<Result<Vec<TrainingPair>>> = parallel::map_ordered(&mined, |query| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
            cfg.seed ^ fnv1a64(query.terms.join(" ").as_bytes()),
        );
        let mut pairs = Vec::new();
        for passage in positive_pairs(query, index, pool, cfg) {
            pairs.extend(perturb(&query.terms, &passage.tokens, vocab, &mut rng)?);
        }
        Ok(pairs)
    });

    let mut pairs: Vec<TrainingPair> = Vec::new();
    for r in per_query {
        pairs.extend(r?);
    }
    let positives = pairs.len();

    let wanted = (cfg.negative_ratio * positives as f64).round() as usize;
    if wanted > 0 {
        pairs.extend(negative_pairs(&mined, pool, wanted, cfg.seed)?);
    }
    let negatives = pairs.len() - positives;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut shards = Vec::new();
    for (i, chunk) in pairs.chunks(cfg.shard_size).enumerate() {
        let name = format!("pairs-{i:05}.jsonl");
        let path = out_dir.join(&name);
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        for pair in chunk {
            serde_json::to_writer(&mut w, pair)?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        shards.push(ShardInfo {
            file: name,
            pairs: chunk.len(),
        });
    }

    let cfg_json = serde_json::to_string(cfg)?;
    let bigram_queries = mined.iter().filter(|q| q.terms.len() == 2).count();
    let manifest = GenManifest {
        queries: mined.len(),
        bigram_queries,
        trigram_queries: mined.len() - bigram_queries,
        positives,
        negatives,
        total_pairs: pairs.len(),
        config_hash: format!("{:016x}", fnv1a64(cfg_json.as_bytes())),
        shards,
    };
    let mpath = out_dir.join("manifest.json");
    let file = File::create(&mpath).map_err(|e| Error::io(&mpath, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
    Ok(manifest)
}
