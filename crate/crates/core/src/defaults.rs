//! The versioned table of engine defaults.
//!
//! Every tunable the engine ships with lives here, in one place, so the
//! CLI's `--show-config` output, the param structs' `Default` impls, and
//! the tests all read the same numbers. Bump [`CONFIG_VERSION`] whenever a
//! value changes meaning or default.

/// Version stamp for the defaults table and the on-disk artifact headers.
pub const CONFIG_VERSION: u32 = 1;

/// BM25 term-frequency saturation.
pub const BM25_K1: f64 = 0.9;
/// BM25 length normalization.
pub const BM25_B: f64 = 0.4;

/// Result-list depths the evaluation sweeps over.
pub const RESULT_DEPTHS: [usize; 4] = [500, 1000, 1500, 2000];

/// Passages retrieved by the dense arm before document aggregation.
pub const PASSAGE_K: usize = 10_000;

/// Feedback documents used to induce a relevance model.
pub const FB_DOCS: usize = 10;
/// Expansion terms kept in a relevance model.
pub const FB_TERMS: usize = 10;
/// Interpolation weight of the feedback model against the query model.
pub const RM3_ALPHA: f64 = 0.5;
/// Dirichlet smoothing mass for query-likelihood scoring.
pub const DIRICHLET_MU: f64 = 1000.0;

/// Passage window length in tokens.
pub const PASSAGE_WINDOW: usize = 20;
/// Passage window stride in tokens.
pub const PASSAGE_STRIDE: usize = 10;

/// Minimum collection occurrences for a term to enter the projection
/// vocabulary of the baseline embedding provider.
pub const VOCAB_MIN_OCCURRENCES: u64 = 300;

/// Minimum document frequency for a mined n-gram query.
pub const MINE_MIN_DF: usize = 5;
/// Minimum BM25 result count for a mined query to be kept.
pub const MINE_MIN_RESULTS: usize = 10;
/// BM25 documents paired with each mined query.
pub const PAIR_TOP_DOCS: usize = 10;
/// Passages taken per paired document.
pub const PAIR_PER_DOC: usize = 5;
/// Negative pairs per positive pair.
pub const NEGATIVE_RATIO: f64 = 1.0;

/// Target score for a full term match.
pub const SCORE_FULL: f64 = 1.0;
/// Target score when one of two query terms matches.
pub const SCORE_BI_SINGLE: f64 = 0.6;
/// Target score when two of three query terms match.
pub const SCORE_TRI_DOUBLE: f64 = 0.65;
/// Target score when one of three query terms matches.
pub const SCORE_TRI_SINGLE: f64 = 0.55;

/// Lloyd iterations for the ANN coarse quantizer.
pub const KMEANS_MAX_ITERS: usize = 20;

/// One row of the defaults table: name, rendered value, one-line meaning.
pub struct Entry {
    pub name: &'static str,
    pub value: String,
    pub what: &'static str,
}

/// The full defaults table in a fixed order, for `--show-config`.
pub fn table() -> Vec<Entry> {
    fn e(name: &'static str, value: impl ToString, what: &'static str) -> Entry {
        Entry {
            name,
            value: value.to_string(),
            what,
        }
    }
    vec![
        e("config_version", CONFIG_VERSION, "defaults table version"),
        e("bm25.k1", BM25_K1, "BM25 term-frequency saturation"),
        e("bm25.b", BM25_B, "BM25 length normalization"),
        e(
            "result_depths",
            format!("{:?}", RESULT_DEPTHS),
            "evaluation result-list depths",
        ),
        e("passage_k", PASSAGE_K, "passages fetched by the dense arm"),
        e("rm.fb_docs", FB_DOCS, "feedback documents for RM1"),
        e("rm.fb_terms", FB_TERMS, "expansion terms kept in RM1"),
        e("rm.alpha", RM3_ALPHA, "RM3 feedback interpolation weight"),
        e("rm.mu", DIRICHLET_MU, "Dirichlet smoothing mass"),
        e("passage.window", PASSAGE_WINDOW, "passage window in tokens"),
        e("passage.stride", PASSAGE_STRIDE, "passage stride in tokens"),
        e(
            "embed.vocab_min_occurrences",
            VOCAB_MIN_OCCURRENCES,
            "collection occurrences to enter the projection vocabulary",
        ),
        e("mine.min_df", MINE_MIN_DF, "document frequency floor for mined n-grams"),
        e(
            "mine.min_results",
            MINE_MIN_RESULTS,
            "BM25 result floor for mined queries",
        ),
        e("pairs.top_docs", PAIR_TOP_DOCS, "BM25 documents paired per query"),
        e("pairs.per_doc", PAIR_PER_DOC, "passages paired per document"),
        e("pairs.negative_ratio", NEGATIVE_RATIO, "negatives per positive"),
        e("pairs.score_full", SCORE_FULL, "target score, all terms match"),
        e(
            "pairs.score_bi_single",
            SCORE_BI_SINGLE,
            "target score, 1 of 2 terms match",
        ),
        e(
            "pairs.score_tri_double",
            SCORE_TRI_DOUBLE,
            "target score, 2 of 3 terms match",
        ),
        e(
            "pairs.score_tri_single",
            SCORE_TRI_SINGLE,
            "target score, 1 of 3 terms match",
        ),
        e("ann.kmeans_max_iters", KMEANS_MAX_ITERS, "Lloyd iteration cap"),
    ]
}
