//! Inverted index and BM25 ranked retrieval: the lexical arm.
//!
//! Scoring is the Lucene/Anserini BM25 formulation,
//!
//! ```text
//! score(q, d) = Σ_{t ∈ q} idf(t) · tf(t,d)·(k1+1) / (tf(t,d) + k1·(1 − b + b·|d|/avg_len))
//! idf(t)      = ln(1 + (N − df(t) + 0.5) / (df(t) + 0.5))
//! ```
//!
//! with `k1 = 0.9`, `b = 0.4` by default. The query is treated as a
//! multiset: a repeated query token contributes once per occurrence. With
//! this idf variant every score is ≥ 0, and a document scores 0 exactly
//! when it shares no term with the query.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binio;
use crate::corpus::{Document, Query};
use crate::defaults;
use crate::{Error, Result};

/// One ranked entry: a document and its retrieval score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// A ranked result list: scores non-increasing, doc_ids unique, ties broken
/// by ascending doc_id so the order is total and reproducible.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredList {
    entries: Vec<ScoredDoc>,
}

impl ScoredList {
    /// Sort `(doc_id, score)` pairs into a ranked list. Scores must be
    /// finite; doc_ids must be unique (checked in debug builds).
    pub fn from_unsorted(mut entries: Vec<(String, f64)>) -> ScoredList {
        debug_assert!(
            {
                let mut ids: Vec<&str> = entries.iter().map(|(d, _)| d.as_str()).collect();
                ids.sort_unstable();
                let before = ids.len();
                ids.dedup();
                ids.len() == before
            },
            "duplicate doc_id in scored list"
        );
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ScoredList {
            entries: entries
                .into_iter()
                .map(|(doc_id, score)| ScoredDoc { doc_id, score })
                .collect(),
        }
    }

    /// A list already in rank order (e.g. read back from a run file).
    pub fn from_ranked(entries: Vec<(String, f64)>) -> ScoredList {
        ScoredList {
            entries: entries
                .into_iter()
                .map(|(doc_id, score)| ScoredDoc { doc_id, score })
                .collect(),
        }
    }

    pub fn entries(&self) -> &[ScoredDoc] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn truncate(&mut self, c: usize) {
        self.entries.truncate(c);
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScoredDoc> {
        self.entries.iter()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.entries.iter().any(|e| e.doc_id == doc_id)
    }
}

/// BM25 free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: defaults::BM25_K1,
            b: defaults::BM25_B,
        }
    }
}

/// Global statistics written to the JSON sidecar next to the index file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub format_version: u32,
    pub n_docs: usize,
    pub n_terms: usize,
    pub total_tokens: u64,
    pub avg_doc_len: f64,
}

const INDEX_MAGIC: &[u8; 8] = b"TDMLEX01";
const INDEX_VERSION: u32 = 1;

/// Immutable inverted index over a normalized corpus. Safe to share across
/// threads once built; every search is read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalIndex {
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    /// Per term: (doc index, term frequency), ascending doc index.
    postings: Vec<Vec<(u32, u32)>>,
    /// Per term: total occurrences in the collection.
    cf: Vec<u64>,
    doc_ids: Vec<String>,
    doc_indices: HashMap<String, u32>,
    doc_lens: Vec<u32>,
    /// Per doc: (term id, term frequency), ascending term id.
    forward: Vec<Vec<(u32, u32)>>,
    total_tokens: u64,
}

impl LexicalIndex {
    /// Build from a normalized corpus. The corpus must be nonempty; a
    /// duplicate doc_id is an error naming the id.
    pub fn build(docs: &[Document]) -> Result<LexicalIndex> {
        if docs.is_empty() {
            return Err(Error::invalid_param("corpus", "cannot index an empty corpus"));
        }
        let mut idx = LexicalIndex {
            terms: Vec::new(),
            term_ids: HashMap::new(),
            postings: Vec::new(),
            cf: Vec::new(),
            doc_ids: Vec::with_capacity(docs.len()),
            doc_indices: HashMap::with_capacity(docs.len()),
            doc_lens: Vec::with_capacity(docs.len()),
            forward: Vec::with_capacity(docs.len()),
            total_tokens: 0,
        };
        for doc in docs {
            let d = idx.doc_ids.len() as u32;
            if idx.doc_indices.insert(doc.doc_id.clone(), d).is_some() {
                return Err(Error::DuplicateDocId(doc.doc_id.clone()));
            }
            idx.doc_ids.push(doc.doc_id.clone());
            idx.doc_lens.push(doc.tokens.len() as u32);
            idx.total_tokens += doc.tokens.len() as u64;

            let mut counts: HashMap<u32, u32> = HashMap::new();
            for tok in &doc.tokens {
                let tid = match idx.term_ids.get(tok) {
                    Some(&tid) => tid,
                    None => {
                        let tid = idx.terms.len() as u32;
                        idx.term_ids.insert(tok.clone(), tid);
                        idx.terms.push(tok.clone());
                        idx.postings.push(Vec::new());
                        idx.cf.push(0);
                        tid
                    }
                };
                *counts.entry(tid).or_insert(0) += 1;
            }
            let mut fwd: Vec<(u32, u32)> = counts.into_iter().collect();
            fwd.sort_unstable_by_key(|&(tid, _)| tid);
            for &(tid, tf) in &fwd {
                idx.postings[tid as usize].push((d, tf));
                idx.cf[tid as usize] += tf as u64;
            }
            idx.forward.push(fwd);
        }
        Ok(idx)
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.total_tokens as f64 / self.doc_ids.len() as f64
    }

    pub fn has_doc(&self, doc_id: &str) -> bool {
        self.doc_indices.contains_key(doc_id)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_ids.iter().map(|s| s.as_str())
    }

    pub fn doc_len(&self, doc_id: &str) -> Result<u32> {
        let d = self.doc_index(doc_id)?;
        Ok(self.doc_lens[d as usize])
    }

    /// Iterate the indexed vocabulary in term-id (insertion) order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|s| s.as_str())
    }

    /// Internal document indices of the docs containing `term`.
    pub(crate) fn term_doc_indices(&self, term: &str) -> &[(u32, u32)] {
        self.term_ids
            .get(term)
            .map_or(&[][..], |&tid| &self.postings[tid as usize])
    }

    /// Document frequency: number of documents containing the term.
    pub fn df(&self, term: &str) -> usize {
        self.term_ids
            .get(term)
            .map_or(0, |&tid| self.postings[tid as usize].len())
    }

    /// Collection frequency: total occurrences of the term.
    pub fn cf(&self, term: &str) -> u64 {
        self.term_ids.get(term).map_or(0, |&tid| self.cf[tid as usize])
    }

    /// Collection language-model probability, `cf(term) / total_tokens`.
    pub fn collection_prob(&self, term: &str) -> f64 {
        self.cf(term) as f64 / self.total_tokens as f64
    }

    /// Term frequency of `term` in `doc_id` (0 when absent either way).
    pub fn tf(&self, term: &str, doc_id: &str) -> u32 {
        let (Some(&tid), Some(&d)) = (self.term_ids.get(term), self.doc_indices.get(doc_id))
        else {
            return 0;
        };
        self.tf_by_ids(tid, d)
    }

    /// `ln(1 + (N − df + 0.5)/(df + 0.5))`; finite for every term, including
    /// unseen ones (df = 0), and strictly decreasing in df.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df(term) as f64;
        let n = self.n_docs() as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Iterate a document's distinct terms with frequencies.
    pub fn doc_terms(&self, doc_id: &str) -> Result<impl Iterator<Item = (&str, u32)>> {
        let d = self.doc_index(doc_id)?;
        Ok(self.forward[d as usize]
            .iter()
            .map(|&(tid, tf)| (self.terms[tid as usize].as_str(), tf)))
    }

    /// BM25 score of one document for a query. 0 when no query term occurs;
    /// unknown doc_id is a lookup error.
    pub fn bm25_score(&self, query: &Query, doc_id: &str, params: &Bm25Params) -> Result<f64> {
        let d = self.doc_index(doc_id)?;
        let norm = self.length_norm(d, params);
        let mut score = 0.0;
        for term in &query.tokens {
            if let Some(&tid) = self.term_ids.get(term) {
                let tf = self.tf_by_ids(tid, d);
                if tf > 0 {
                    score += self.idf_by_id(tid) * tf_saturation(tf, norm, params);
                }
            }
        }
        Ok(score)
    }

    /// Top-`c` documents by BM25 among documents sharing at least one term
    /// with the query. An unanswerable (empty) query yields an empty list;
    /// the caller can see the condition via [`Query::is_unanswerable`].
    ///
    /// Panics if `c == 0` (caller contract).
    pub fn search(&self, query: &Query, c: usize, params: &Bm25Params) -> ScoredList {
        assert!(c > 0, "result depth c must be > 0");
        if query.is_unanswerable() {
            return ScoredList::default();
        }
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in &query.tokens {
            let Some(&tid) = self.term_ids.get(term) else {
                continue;
            };
            let idf = self.idf_by_id(tid);
            for &(d, tf) in &self.postings[tid as usize] {
                let norm = self.length_norm(d, params);
                *acc.entry(d).or_insert(0.0) += idf * tf_saturation(tf, norm, params);
            }
        }
        let entries: Vec<(String, f64)> = acc
            .into_iter()
            .map(|(d, s)| (self.doc_ids[d as usize].clone(), s))
            .collect();
        let mut list = ScoredList::from_unsorted(entries);
        list.truncate(c);
        list
    }

    /// Global statistics for the JSON sidecar.
    pub fn stats(&self) -> IndexStats {
        IndexStats {
            format_version: INDEX_VERSION,
            n_docs: self.n_docs(),
            n_terms: self.n_terms(),
            total_tokens: self.total_tokens,
            avg_doc_len: self.avg_doc_len(),
        }
    }

    /// Write the index as a single binary file plus a `<path>.json` sidecar
    /// of global statistics. The byte stream is deterministic for a given
    /// index, so rebuilding and re-saving the same corpus is byte-identical.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        binio::write_header(&mut w, INDEX_MAGIC, INDEX_VERSION, path)?;
        binio::write_u32(&mut w, self.doc_ids.len() as u32, path)?;
        binio::write_u64(&mut w, self.total_tokens, path)?;
        for (id, &len) in self.doc_ids.iter().zip(&self.doc_lens) {
            binio::write_str(&mut w, id, path)?;
            binio::write_u32(&mut w, len, path)?;
        }
        binio::write_u32(&mut w, self.terms.len() as u32, path)?;
        for tid in 0..self.terms.len() {
            binio::write_str(&mut w, &self.terms[tid], path)?;
            binio::write_u64(&mut w, self.cf[tid], path)?;
            let plist = &self.postings[tid];
            binio::write_u32(&mut w, plist.len() as u32, path)?;
            for &(d, tf) in plist {
                binio::write_u32(&mut w, d, path)?;
                binio::write_u32(&mut w, tf, path)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;

        let sidecar = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.stats())?;
        std::fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))?;
        Ok(())
    }

    /// Load an index saved by [`LexicalIndex::save`].
    pub fn load(path: &Path) -> Result<LexicalIndex> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        binio::expect_header(&mut r, INDEX_MAGIC, INDEX_VERSION, path)?;
        let n_docs = binio::read_u32(&mut r, path)? as usize;
        let total_tokens = binio::read_u64(&mut r, path)?;
        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_lens = Vec::with_capacity(n_docs);
        let mut doc_indices = HashMap::with_capacity(n_docs);
        for d in 0..n_docs {
            let id = binio::read_str(&mut r, path)?;
            doc_lens.push(binio::read_u32(&mut r, path)?);
            doc_indices.insert(id.clone(), d as u32);
            doc_ids.push(id);
        }
        let n_terms = binio::read_u32(&mut r, path)? as usize;
        let mut terms = Vec::with_capacity(n_terms);
        let mut term_ids = HashMap::with_capacity(n_terms);
        let mut postings = Vec::with_capacity(n_terms);
        let mut cf = Vec::with_capacity(n_terms);
        let mut forward: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_docs];
        for tid in 0..n_terms {
            let term = binio::read_str(&mut r, path)?;
            term_ids.insert(term.clone(), tid as u32);
            terms.push(term);
            cf.push(binio::read_u64(&mut r, path)?);
            let df = binio::read_u32(&mut r, path)? as usize;
            let mut plist = Vec::with_capacity(df);
            for _ in 0..df {
                let d = binio::read_u32(&mut r, path)?;
                let tf = binio::read_u32(&mut r, path)?;
                if d as usize >= n_docs {
                    return Err(Error::file_format(path, format!("doc index {d} out of range")));
                }
                plist.push((d, tf));
                forward[d as usize].push((tid as u32, tf));
            }
            postings.push(plist);
        }
        Ok(LexicalIndex {
            terms,
            term_ids,
            postings,
            cf,
            doc_ids,
            doc_indices,
            doc_lens,
            forward,
            total_tokens,
        })
    }

    fn doc_index(&self, doc_id: &str) -> Result<u32> {
        self.doc_indices
            .get(doc_id)
            .copied()
            .ok_or_else(|| Error::UnknownDocId(doc_id.to_string()))
    }

    fn tf_by_ids(&self, tid: u32, d: u32) -> u32 {
        let fwd = &self.forward[d as usize];
        match fwd.binary_search_by_key(&tid, |&(t, _)| t) {
            Ok(i) => fwd[i].1,
            Err(_) => 0,
        }
    }

    fn idf_by_id(&self, tid: u32) -> f64 {
        let df = self.postings[tid as usize].len() as f64;
        let n = self.n_docs() as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn length_norm(&self, d: u32, params: &Bm25Params) -> f64 {
        let len = self.doc_lens[d as usize] as f64;
        1.0 - params.b + params.b * len / self.avg_doc_len()
    }
}

/// Sidecar path for an index file: `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn tf_saturation(tf: u32, length_norm: f64, params: &Bm25Params) -> f64 {
    let tf = tf as f64;
    tf * (params.k1 + 1.0) / (tf + params.k1 * length_norm)
}
