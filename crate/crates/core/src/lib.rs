//! Hybrid document retrieval engine.
//!
//! Two retrieval arms run side by side: a BM25 inverted index over whole
//! documents and a dense inner-product index over fixed-width passages.
//! Their candidate pools are merged by scoring every pooled document under
//! an RM3 relevance model induced from the lexical arm's feedback documents,
//! so documents that share no surface term with the query can still enter
//! the final list.
//!
//! The crate also ships the weak-supervision side of the pipeline: mining
//! n-gram queries from the corpus, pairing them with passages, perturbing
//! term matches into graded training pairs, and writing JSONL shards.
//!
//! Module map:
//!
//! - [`corpus`]: normalization, passage windowing, corpus ingestion
//! - [`lexical`]: inverted index, BM25 scoring, index persistence
//! - [`feedback`]: RM1/RM3 relevance models and Dirichlet query likelihood
//! - [`dense`]: vector index, exact and IVF approximate KNN, vector files
//! - [`embedder`]: embedding providers and the training-pair loss
//! - [`weaksup`]: weak-supervision training-data generation
//! - [`hybrid`]: the two-arm retrieval driver and the oracle merge bound
//! - [`eval`]: recall/MAP/RI metrics, analyses, TREC run and qrels I/O
//!
//! With the default `parallel` feature the batch-shaped inner loops (KNN
//! scans, k-means assignment, per-query work) run on rayon; without it the
//! same code paths run sequentially and produce identical output.

pub(crate) mod binio;
pub mod corpus;
pub mod defaults;
pub mod dense;
pub mod embedder;
mod error;
pub mod eval;
pub mod feedback;
pub mod hybrid;
pub mod lexical;
pub(crate) mod parallel;
pub mod weaksup;

pub use error::{Error, Result};
pub use lexical::{ScoredDoc, ScoredList};
