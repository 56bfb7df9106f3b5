//! On-disk layout of an index directory.
//!
//! `tandem index` writes three files: `index.bin` (the lexical index),
//! `docs.jsonl` (one tokenized document per line, the source for passage
//! windowing and query mining), and `manifest.json` (the run manifest).
//! Vector files live wherever the user points `tandem embed`; an IVF
//! sidecar sits next to its vector file with `.ann` appended.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use tandem::corpus::Document;
use tandem::lexical::LexicalIndex;

pub const INDEX_FILE: &str = "index.bin";
pub const DOCS_FILE: &str = "docs.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn index_path(dir: &Path) -> PathBuf {
    dir.join(INDEX_FILE)
}

pub fn docs_path(dir: &Path) -> PathBuf {
    dir.join(DOCS_FILE)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

/// The IVF sidecar path for a vector file: its name with `.ann` appended.
pub fn ann_path(vectors: &Path) -> PathBuf {
    let mut s = vectors.as_os_str().to_os_string();
    s.push(".ann");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct DocRecordRef<'a> {
    doc_id: &'a str,
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct DocRecord {
    doc_id: String,
    tokens: Vec<String>,
}

/// Write tokenized documents as JSONL, byte-stable for a fixed corpus.
pub fn save_docs(docs: &[Document], path: &Path) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for doc in docs {
        let rec = DocRecordRef {
            doc_id: &doc.doc_id,
            tokens: &doc.tokens,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_docs(path: &Path) -> anyhow::Result<Vec<Document>> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad document record", path.display(), i + 1))?;
        docs.push(Document::from_tokens(rec.doc_id, rec.tokens));
    }
    Ok(docs)
}

pub fn load_index(dir: &Path) -> anyhow::Result<LexicalIndex> {
    Ok(LexicalIndex::load(&index_path(dir))?)
}
