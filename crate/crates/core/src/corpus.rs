//! Corpus ingestion, text normalization, and passage windowing.
//!
//! Normalization is: lowercase, split on non-alphanumeric (numerals are
//! kept as tokens), drop stopwords, stem. Stopwords are filtered before
//! stemming, on surface forms. Documents are windowed into overlapping
//! fixed-width passages; the short final window is kept so the passages
//! cover every token.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::defaults;
use crate::parallel;
use crate::{Error, Result};

/// Version 1 of the built-in English stopword list (the Lucene/Anserini
/// analyzer default). Override with [`NormalizeConfig::with_stopwords`].
pub const STOPWORDS_EN: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is",
    "it", "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there",
    "these", "they", "this", "to", "was", "will", "with",
];

/// Stemming algorithm applied after stopword removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StemmerKind {
    /// Snowball English (Porter family). The default.
    Porter,
    /// No stemming.
    None,
}

impl StemmerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "porter" => Ok(StemmerKind::Porter),
            "none" => Ok(StemmerKind::None),
            other => Err(Error::invalid_param(
                "stemmer",
                format!("unknown stemmer {other:?}, expected porter|none"),
            )),
        }
    }
}

/// Normalization settings: stopword set plus stemmer choice.
pub struct NormalizeConfig {
    stemmer: StemmerKind,
    stopwords: HashSet<String>,
    porter: rust_stemmers::Stemmer,
}

impl Clone for NormalizeConfig {
    fn clone(&self) -> Self {
        NormalizeConfig::new(self.stemmer, self.stopwords.iter().cloned())
    }
}

impl std::fmt::Debug for NormalizeConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormalizeConfig")
            .field("stemmer", &self.stemmer)
            .field("stopwords", &self.stopwords.len())
            .finish()
    }
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig::new(StemmerKind::Porter, STOPWORDS_EN.iter().map(|s| s.to_string()))
    }
}

impl NormalizeConfig {
    pub fn new(stemmer: StemmerKind, stopwords: impl IntoIterator<Item = String>) -> Self {
        NormalizeConfig {
            stemmer,
            stopwords: stopwords.into_iter().collect(),
            porter: rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English),
        }
    }

    /// Default stemmer with a stopword list read from `path`: one word per
    /// line, trimmed, blank lines skipped, lowercased.
    pub fn with_stopwords_file(stemmer: StemmerKind, path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let w = line.trim();
            if !w.is_empty() {
                words.push(w.to_lowercase());
            }
        }
        Ok(NormalizeConfig::new(stemmer, words))
    }

    pub fn stemmer(&self) -> StemmerKind {
        self.stemmer
    }

    pub fn is_stopword(&self, term: &str) -> bool {
        self.stopwords.contains(term)
    }

    fn stem(&self, term: &str) -> String {
        match self.stemmer {
            StemmerKind::Porter => self.porter.stem(term).into_owned(),
            StemmerKind::None => term.to_string(),
        }
    }
}

/// Lowercase, split on non-alphanumeric, drop stopwords, stem.
/// Deterministic for a fixed config; empty input yields an empty sequence.
pub fn tokenize(text: &str, cfg: &NormalizeConfig) -> Vec<String> {
    let lower = text.to_lowercase();
    lower
        .split(|ch: char| !ch.is_alphanumeric())
        .filter(|tok| !tok.is_empty())
        .filter(|tok| !cfg.is_stopword(tok))
        .map(|tok| cfg.stem(tok))
        .collect()
}

/// A document after normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, raw_text: impl Into<String>, cfg: &NormalizeConfig) -> Self {
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text, cfg);
        Document {
            doc_id: doc_id.into(),
            raw_text,
            tokens,
        }
    }

    /// A document built from already-normalized tokens (snapshot reload,
    /// synthetic corpora). `raw_text` is left empty.
    pub fn from_tokens(doc_id: impl Into<String>, tokens: Vec<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            raw_text: String::new(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One fixed-width window of a document. Window `k` starts at token offset
/// `k * stride`; all windows except possibly the last are full-length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub doc_id: String,
    pub ordinal: u32,
    pub tokens: Vec<String>,
}

impl Passage {
    /// Stable id of this passage: `{doc_id}#p{ordinal}`.
    pub fn passage_id(&self) -> String {
        passage_id(&self.doc_id, self.ordinal)
    }
}

/// Render the passage id for a (doc, ordinal) pair: `{doc_id}#p{ordinal}`.
pub fn passage_id(doc_id: &str, ordinal: u32) -> String {
    format!("{doc_id}#p{ordinal}")
}

/// A search query after normalization. A query whose text normalizes to
/// nothing is kept but flagged unanswerable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
}

impl Query {
    pub fn new(query_id: impl Into<String>, raw_text: impl Into<String>, cfg: &NormalizeConfig) -> Self {
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text, cfg);
        Query {
            query_id: query_id.into(),
            raw_text,
            tokens,
        }
    }

    pub fn from_tokens(query_id: impl Into<String>, tokens: Vec<String>) -> Self {
        Query {
            query_id: query_id.into(),
            raw_text: String::new(),
            tokens,
        }
    }

    /// True when normalization left no tokens to match on.
    pub fn is_unanswerable(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Split a document into overlapping windows. The window count is
/// `ceil(max(n - window, 0) / stride) + 1`; the final window may be short
/// and is kept so coverage has no gaps.
pub fn split_passages(doc: &Document, window: usize, stride: usize) -> Result<Vec<Passage>> {
    if window == 0 {
        return Err(Error::invalid_param("window", "must be > 0"));
    }
    if stride == 0 || stride > window {
        return Err(Error::invalid_param(
            "stride",
            format!("must satisfy 0 < stride <= window, got stride={stride} window={window}"),
        ));
    }
    let n = doc.tokens.len();
    let count = n.saturating_sub(window).div_ceil(stride) + 1;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * stride;
        let end = (start + window).min(n);
        out.push(Passage {
            doc_id: doc.doc_id.clone(),
            ordinal: k as u32,
            tokens: doc.tokens[start..end].to_vec(),
        });
    }
    Ok(out)
}

/// Split every document with the default window geometry, in corpus order.
pub fn split_corpus(docs: &[Document]) -> Result<Vec<Passage>> {
    let per_doc = parallel::map_ordered(docs, |d| {
        split_passages(d, defaults::PASSAGE_WINDOW, defaults::PASSAGE_STRIDE)
    });
    let mut out = Vec::new();
    for p in per_doc {
        out.extend(p?);
    }
    Ok(out)
}

/// Supported corpus file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON object per line: `{"id": "...", "text": "..."}`.
    Jsonl,
    /// TREC SGML: `<DOC>` blocks with `<DOCNO>` and `<TEXT>` tags.
    TrecSgml,
}

impl CorpusFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "trec" | "trec-sgml" => Ok(CorpusFormat::TrecSgml),
            other => Err(Error::invalid_param(
                "format",
                format!("unknown corpus format {other:?}, expected jsonl|trec-sgml"),
            )),
        }
    }
}

/// Read and normalize a corpus file. Documents come back in file order;
/// a duplicate doc_id is an error naming the id. Tokenization runs in
/// parallel over records; the raw read is a single pass.
pub fn ingest(path: &Path, format: CorpusFormat, cfg: &NormalizeConfig) -> Result<Vec<Document>> {
    let raw = match format {
        CorpusFormat::Jsonl => read_jsonl(path)?,
        CorpusFormat::TrecSgml => read_trec_sgml(path)?,
    };
    let mut seen = HashSet::with_capacity(raw.len());
    for (id, _) in &raw {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateDocId(id.clone()));
        }
    }
    Ok(parallel::map_ordered(&raw, |(id, text)| {
        Document::new(id.clone(), text.clone(), cfg)
    }))
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: String,
    text: String,
}

fn read_jsonl(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, i + 1, format!("bad JSONL record: {e}")))?;
        out.push((rec.id, rec.text));
    }
    Ok(out)
}

/// Remove `<...>` spans; TREC text bodies carry markup like `<P>`.
fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for ch in s.chars() {
        match ch {
            '<' => in_tag = true,
            '>' if in_tag => {
                in_tag = false;
                out.push(' ');
            }
            _ if !in_tag => out.push(ch),
            _ => {}
        }
    }
    out
}

/// Case-insensitive `find` for a tag literal; returns the byte offset.
fn find_tag(line: &str, tag: &str) -> Option<usize> {
    line.to_ascii_lowercase().find(&tag.to_ascii_lowercase())
}

fn read_trec_sgml(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();

    let mut in_doc = false;
    let mut in_text = false;
    let mut doc_start_line = 0usize;
    let mut docno: Option<String> = None;
    let mut text = String::new();

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        if !in_doc {
            if find_tag(&line, "<doc>").is_some() {
                in_doc = true;
                doc_start_line = lineno;
                docno = None;
                text.clear();
            }
            continue;
        }
        if in_text {
            if let Some(end) = find_tag(&line, "</text>") {
                text.push_str(&line[..end]);
                text.push('\n');
                in_text = false;
            } else {
                text.push_str(&line);
                text.push('\n');
            }
            continue;
        }
        if let Some(start) = find_tag(&line, "<docno>") {
            let rest = &line[start + "<docno>".len()..];
            let value = match find_tag(rest, "</docno>") {
                Some(end) => &rest[..end],
                None => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "unterminated <DOCNO> (expected close tag on the same line)",
                    ))
                }
            };
            docno = Some(value.trim().to_string());
        } else if let Some(start) = find_tag(&line, "<text>") {
            let rest = &line[start + "<text>".len()..];
            if let Some(end) = find_tag(rest, "</text>") {
                text.push_str(&rest[..end]);
                text.push('\n');
            } else {
                text.push_str(rest);
                text.push('\n');
                in_text = true;
            }
        } else if find_tag(&line, "</doc>").is_some() {
            let id = docno.take().ok_or_else(|| {
                Error::parse(
                    path,
                    doc_start_line,
                    "document block has no <DOCNO>".to_string(),
                )
            })?;
            out.push((id, strip_tags(&text)));
            in_doc = false;
            in_text = false;
        }
        // Any other tag or stray line outside <TEXT> is tolerated and skipped.
    }
    if in_doc {
        return Err(Error::parse(
            path,
            doc_start_line,
            "unterminated <DOC> block".to_string(),
        ));
    }
    Ok(out)
}

/// Read a queries file: one `query_id<TAB>text` per line.
pub fn read_queries_tsv(path: &Path, cfg: &NormalizeConfig) -> Result<Vec<Query>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = line.split_once('\t').ok_or_else(|| {
            Error::parse(path, i + 1, "expected query_id<TAB>text".to_string())
        })?;
        out.push(Query::new(qid.trim(), text, cfg));
    }
    Ok(out)
}
