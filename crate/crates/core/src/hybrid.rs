//! The two-arm retrieval engine: BM25 and dense passage KNN run
//! concurrently, their document lists are pooled, and a relevance model
//! induced from the lexical list scores every pooled document to produce
//! the final ranking. Also provides the oracle merge used to measure the
//! recall headroom a perfect merger would reach.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use crate::corpus::Query;
use crate::defaults;
use crate::dense::{aggregate_to_docs, VectorIndex};
use crate::embedder::EmbeddingProvider;
use crate::feedback::{induce_rm1, interpolate_rm3, rm_score};
use crate::lexical::{Bm25Params, LexicalIndex, ScoredList};
use crate::parallel;
use crate::{Error, Result};

/// Knobs for one hybrid retrieval. `c` is both the per-arm and the final
/// list depth; the semantic arm retrieves `passage_k` passages before
/// aggregating them to documents.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    pub c: usize,
    pub passage_k: usize,
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub alpha: f64,
    pub mu: f64,
    pub bm25: Bm25Params,
    /// Probe depth for approximate KNN; `None` scans exhaustively.
    pub n_probe: Option<usize>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            c: defaults::RESULT_DEPTHS[1],
            passage_k: defaults::PASSAGE_K,
            fb_docs: defaults::FB_DOCS,
            fb_terms: defaults::FB_TERMS,
            alpha: defaults::RM3_ALPHA,
            mu: defaults::DIRICHLET_MU,
            bm25: Bm25Params::default(),
            n_probe: None,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c == 0 {
            return Err(Error::invalid_param("c", "must be > 0"));
        }
        if self.passage_k < self.c {
            return Err(Error::invalid_param(
                "passage_k",
                format!("must be ≥ c ({} < {})", self.passage_k, self.c),
            ));
        }
        if self.fb_docs == 0 || self.fb_terms == 0 {
            return Err(Error::invalid_param("fb_docs/fb_terms", "must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid_param("alpha", "must be within [0, 1]"));
        }
        if !(self.mu > 0.0) {
            return Err(Error::invalid_param("mu", "must be > 0"));
        }
        if self.n_probe == Some(0) {
            return Err(Error::invalid_param("n_probe", "must be ≥ 1 when set"));
        }
        Ok(())
    }
}

/// A hybrid result with its provenance flags and per-stage timings.
#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub list: ScoredList,
    /// The lexical arm returned nothing, so the semantic ordering was
    /// returned as-is (no relevance model could be induced).
    pub used_fallback: bool,
    /// The semantic arm contributed nothing (empty vector index, or the
    /// provider has no entry for this query).
    pub semantic_empty: bool,
    pub lexical_time: Duration,
    pub semantic_time: Duration,
    pub merge_time: Duration,
}

fn semantic_arm(
    query: &Query,
    vectors: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    cfg: &HybridConfig,
) -> Result<ScoredList> {
    if vectors.is_empty() {
        return Ok(ScoredList::default());
    }
    let embedded = match provider.embed_query(&query.tokens) {
        Ok(v) => v,
        // No vector for this query is a degraded mode, not a failure.
        Err(Error::UnknownEmbeddingKey(_)) => return Ok(ScoredList::default()),
        Err(e) => return Err(e),
    };
    let hits = match cfg.n_probe {
        Some(p) => vectors.knn_approx(&embedded, cfg.passage_k, p)?,
        None => vectors.knn_exact(&embedded, cfg.passage_k)?,
    };
    Ok(aggregate_to_docs(&hits, cfg.c))
}

/// Run both arms concurrently, pool their documents (at most `2c`
/// uniques), and rank the pool by relevance-model score. The model is
/// induced from the lexical list alone; ties break by ascending doc_id.
/// An empty lexical list falls back to the semantic ordering, flagged.
pub fn retrieve_hybrid(
    query: &Query,
    index: &LexicalIndex,
    vectors: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    cfg: &HybridConfig,
) -> Result<HybridOutcome> {
    cfg.validate()?;

    let (lexical, semantic) = parallel::join(
        || {
            let t = Instant::now();
            let list = index.search(query, cfg.c, &cfg.bm25);
            (list, t.elapsed())
        },
        || {
            let t = Instant::now();
            let list = semantic_arm(query, vectors, provider, cfg);
            (list, t.elapsed())
        },
    );
    let (lexical, lexical_time) = lexical;
    let (semantic, semantic_time) = semantic;
    let semantic = semantic?;
    let semantic_empty = semantic.is_empty();

    let merge_start = Instant::now();
    if lexical.is_empty() {
        return Ok(HybridOutcome {
            list: semantic,
            used_fallback: true,
            semantic_empty,
            lexical_time,
            semantic_time,
            merge_time: merge_start.elapsed(),
        });
    }

    let mut pool: Vec<&str> = lexical.doc_ids().collect();
    let in_lexical: HashSet<&str> = pool.iter().copied().collect();
    pool.extend(semantic.doc_ids().filter(|d| !in_lexical.contains(d)));
    debug_assert!(pool.len() <= 2 * cfg.c);

    let rm1 = induce_rm1(index, query, &lexical, cfg.fb_docs, cfg.fb_terms, cfg.mu)?;
    let rm3 = interpolate_rm3(&rm1, query, cfg.alpha)?;
    let scored: Vec<Result<(String, f64)>> = parallel::map_ordered(&pool, |doc_id| {
        Ok((doc_id.to_string(), rm_score(index, &rm3, doc_id, cfg.mu)?))
    });
    let entries: Vec<(String, f64)> = scored.into_iter().collect::<Result<_>>()?;
    let mut list = ScoredList::from_unsorted(entries);
    list.truncate(cfg.c);

    Ok(HybridOutcome {
        list,
        used_fallback: false,
        semantic_empty,
        lexical_time,
        semantic_time,
        merge_time: merge_start.elapsed(),
    })
}

/// Upper-bound merge against ground truth: keep the lexical list but let
/// relevant documents found only by the semantic arm take the places of
/// non-relevant lexical documents (replacement order does not matter for
/// recall; this implementation fills from the bottom of the list). Output
/// scores are synthetic rank scores; only membership and length are
/// meaningful. Recall can never drop below the lexical list's.
pub fn oracle_merge(
    lexical: &ScoredList,
    semantic: &ScoredList,
    relevant: &HashSet<String>,
    c: usize,
) -> ScoredList {
    assert!(c > 0, "result depth c must be > 0");
    let lex: Vec<&str> = lexical.doc_ids().take(c).collect();
    let in_lex: HashSet<&str> = lex.iter().copied().collect();
    let mut incoming: Vec<&str> = semantic
        .doc_ids()
        .take(c)
        .filter(|d| relevant.contains(*d) && !in_lex.contains(d))
        .collect();

    let mut merged: Vec<&str> = lex.clone();
    for slot in merged.iter_mut().rev() {
        if incoming.is_empty() {
            break;
        }
        if !relevant.contains(*slot) {
            *slot = incoming.remove(0);
        }
    }
    while merged.len() < c && !incoming.is_empty() {
        merged.push(incoming.remove(0));
    }

    let n = merged.len();
    ScoredList::from_ranked(
        merged
            .into_iter()
            .enumerate()
            .map(|(i, d)| (d.to_string(), (n - i) as f64))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::embedder::PrecomputedProvider;
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn list_of(pairs: &[(&str, f64)]) -> ScoredList {
        ScoredList::from_ranked(
            pairs.iter().map(|(d, s)| (d.to_string(), *s)).collect(),
        )
    }

    /// Twelve documents. d00..d03 match the query and share the topic
    /// terms; d04/d05 are weak matches; d06 is relevant but shares no
    /// query term, only topic terms; the rest are background noise.
    fn fixture() -> (Vec<Document>, LexicalIndex, VectorIndex, PrecomputedProvider) {
        let texts: Vec<(&str, &str)> = vec![
            ("d00", "storm damage hurricane flood hurricane flood hurricane flood coast"),
            ("d01", "storm damage hurricane flood hurricane flood hurricane flood town"),
            ("d02", "storm damage hurricane flood hurricane flood hurricane flood crews"),
            ("d03", "storm damage hurricane flood hurricane flood hurricane flood report"),
            ("d04", "storm tracking bulletin issued for shipping lanes today extended outlook"),
            ("d05", "minor damage reported after the parade float incident in the evening roundup"),
            ("d06", "hurricane flood hurricane flood hurricane flood hurricane flood shelters"),
            ("d07", "quarterly earnings call transcript for the software firm"),
            ("d08", "recipe collection for winter soups and hearty stews"),
            ("d09", "museum opens a new wing for modern sculpture visitors"),
            ("d10", "railway timetable changes effective from next monday morning"),
            ("d11", "local chess club announces the spring open tournament"),
        ];
        let docs: Vec<Document> = texts
            .iter()
            .map(|(id, t)| Document::from_tokens(id.to_string(), toks(t)))
            .collect();
        let index = LexicalIndex::build(&docs).unwrap();

        // One passage per doc; d06 sits on the query vector, the strong
        // lexical docs nearby, background far away.
        let mut vectors = VectorIndex::new(2).unwrap();
        for (i, (id, _)) in texts.iter().enumerate() {
            let v = match *id {
                "d06" => [1.0, 0.05],
                "d00" | "d01" | "d02" | "d03" => [0.5, 0.1 + i as f32 * 0.01],
                "d04" | "d05" => [0.3, 0.05],
                _ => [0.01, 0.9],
            };
            vectors
                .add(&format!("{id}#p0"), id, &v, false)
                .unwrap();
        }

        let mut map = HashMap::new();
        map.insert("storm damage".to_string(), vec![1.0f32, 0.0]);
        let provider = PrecomputedProvider::new(2, map).unwrap();
        (docs, index, vectors, provider)
    }

    fn fixture_config() -> HybridConfig {
        HybridConfig {
            c: 5,
            passage_k: 8,
            mu: 10.0,
            alpha: 0.7,
            ..HybridConfig::default()
        }
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let ok = fixture_config();
        assert!(ok.validate().is_ok());
        assert!(HybridConfig { c: 0, ..ok.clone() }.validate().is_err());
        assert!(HybridConfig { passage_k: 3, ..ok.clone() }.validate().is_err());
        assert!(HybridConfig { alpha: 1.5, ..ok.clone() }.validate().is_err());
        assert!(HybridConfig { mu: 0.0, ..ok.clone() }.validate().is_err());
        assert!(HybridConfig { n_probe: Some(0), ..ok }.validate().is_err());
    }

    #[test]
    fn semantic_doc_without_query_terms_enters_the_final_list() {
        let (_docs, index, vectors, provider) = fixture();
        let query = Query::from_tokens("q1", toks("storm damage"));
        let cfg = fixture_config();
        let out = retrieve_hybrid(&query, &index, &vectors, &provider, &cfg).unwrap();
        assert!(!out.used_fallback);
        assert!(!out.semantic_empty);
        assert!(out.list.contains("d06"), "{:?}", out.list);
        // d06 shares no query term, so only the semantic arm can have
        // brought it in.
        assert_eq!(index.tf("storm", "d06"), 0);
        assert_eq!(index.tf("damage", "d06"), 0);
    }

    #[test]
    fn hybrid_matches_a_step_by_step_composition_of_the_stages() {
        let (_docs, index, vectors, provider) = fixture();
        let query = Query::from_tokens("q1", toks("storm damage"));
        let cfg = fixture_config();
        let out = retrieve_hybrid(&query, &index, &vectors, &provider, &cfg).unwrap();

        let lexical = index.search(&query, cfg.c, &cfg.bm25);
        let hits = vectors
            .knn_exact(&provider.embed_query(&query.tokens).unwrap(), cfg.passage_k)
            .unwrap();
        let semantic = aggregate_to_docs(&hits, cfg.c);
        let mut pool: Vec<String> = lexical.doc_ids().map(str::to_string).collect();
        for d in semantic.doc_ids() {
            if !pool.iter().any(|x| x == d) {
                pool.push(d.to_string());
            }
        }
        assert!(pool.len() <= 2 * cfg.c);

        let rm1 = induce_rm1(&index, &query, &lexical, cfg.fb_docs, cfg.fb_terms, cfg.mu).unwrap();
        let rm3 = interpolate_rm3(&rm1, &query, cfg.alpha).unwrap();
        let entries: Vec<(String, f64)> = pool
            .iter()
            .map(|d| (d.clone(), rm_score(&index, &rm3, d, cfg.mu).unwrap()))
            .collect();
        let mut expected = ScoredList::from_unsorted(entries);
        expected.truncate(cfg.c);

        assert_eq!(out.list, expected);
        for d in out.list.doc_ids() {
            assert!(pool.iter().any(|x| x == d), "output outside the pool");
        }
    }

    #[test]
    fn empty_semantic_arm_permutes_the_lexical_list() {
        let (_docs, index, _vectors, _provider) = fixture();
        let query = Query::from_tokens("q1", toks("storm damage"));
        let cfg = fixture_config();
        // Provider with no entry for this query: the arm goes empty.
        let provider =
            PrecomputedProvider::new(2, HashMap::from([("other".to_string(), vec![0.0, 1.0])]))
                .unwrap();
        let vectors = {
            let mut v = VectorIndex::new(2).unwrap();
            v.add("d07#p0", "d07", &[0.0, 1.0], false).unwrap();
            v
        };
        let out = retrieve_hybrid(&query, &index, &vectors, &provider, &cfg).unwrap();
        assert!(out.semantic_empty);
        assert!(!out.used_fallback);

        let lexical = index.search(&query, cfg.c, &cfg.bm25);
        let mut got: Vec<&str> = out.list.doc_ids().collect();
        let mut want: Vec<&str> = lexical.doc_ids().collect();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_vector_index_also_flags_semantic_empty() {
        let (_docs, index, _vectors, provider) = fixture();
        let query = Query::from_tokens("q1", toks("storm damage"));
        let vectors = VectorIndex::new(2).unwrap();
        let out = retrieve_hybrid(&query, &index, &vectors, &provider, &fixture_config()).unwrap();
        assert!(out.semantic_empty);
        assert!(!out.list.is_empty());
    }

    #[test]
    fn identical_arms_return_a_permutation_of_that_set() {
        let (_docs, index, _vectors, provider) = fixture();
        let query = Query::from_tokens("q1", toks("storm damage"));
        let cfg = fixture_config();
        let lexical = index.search(&query, cfg.c, &cfg.bm25);
        // Vector index holding exactly the lexical docs.
        let mut vectors = VectorIndex::new(2).unwrap();
        for (i, d) in lexical.doc_ids().enumerate() {
            vectors
                .add(&format!("{d}#p0"), d, &[1.0 - i as f32 * 0.1, 0.0], false)
                .unwrap();
        }
        let out = retrieve_hybrid(&query, &index, &vectors, &provider, &cfg).unwrap();
        let mut got: Vec<&str> = out.list.doc_ids().collect();
        let mut want: Vec<&str> = lexical.doc_ids().collect();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_lexical_list_falls_back_to_semantic_order() {
        let (_docs, index, vectors, _provider) = fixture();
        // No document contains this term, but the provider embeds it.
        let query = Query::from_tokens("q1", toks("zzzznothing"));
        let provider = PrecomputedProvider::new(
            2,
            HashMap::from([("zzzznothing".to_string(), vec![1.0f32, 0.0])]),
        )
        .unwrap();
        let cfg = fixture_config();
        let out = retrieve_hybrid(&query, &index, &vectors, &provider, &cfg).unwrap();
        assert!(out.used_fallback);
        assert!(!out.semantic_empty);

        let hits = vectors.knn_exact(&[1.0, 0.0], cfg.passage_k).unwrap();
        let expected = aggregate_to_docs(&hits, cfg.c);
        assert_eq!(out.list, expected);
    }

    #[test]
    fn both_arms_empty_yields_an_empty_flagged_outcome() {
        let (_docs, index, _vectors, _provider) = fixture();
        let query = Query::from_tokens("q1", toks("zzzznothing"));
        let provider = PrecomputedProvider::new(
            2,
            HashMap::from([("other".to_string(), vec![1.0f32, 0.0])]),
        )
        .unwrap();
        let vectors = VectorIndex::new(2).unwrap();
        let out =
            retrieve_hybrid(&query, &index, &vectors, &provider, &fixture_config()).unwrap();
        assert!(out.list.is_empty());
        assert!(out.used_fallback);
        assert!(out.semantic_empty);
    }

    #[test]
    fn oracle_merge_with_no_unique_relevant_changes_nothing_for_recall() {
        let lexical = list_of(&[("d1", 5.0), ("d2", 4.0), ("d3", 3.0)]);
        let semantic = list_of(&[("d1", 0.9), ("d4", 0.8)]);
        let relevant: HashSet<String> = ["d1".to_string()].into();
        let merged = oracle_merge(&lexical, &semantic, &relevant, 5);
        let lex_rel = lexical.doc_ids().filter(|d| relevant.contains(*d)).count();
        let merged_rel = merged.doc_ids().filter(|d| relevant.contains(*d)).count();
        assert_eq!(lex_rel, merged_rel);
    }

    #[test]
    fn oracle_merge_keeps_a_fully_relevant_lexical_list_intact() {
        let lexical = list_of(&[("d1", 5.0), ("d2", 4.0)]);
        let semantic = list_of(&[("d7", 0.9), ("d8", 0.8)]);
        let relevant: HashSet<String> =
            ["d1", "d2", "d7", "d8"].iter().map(|s| s.to_string()).collect();
        // c equals the lexical length: no free or replaceable slots.
        let merged = oracle_merge(&lexical, &semantic, &relevant, 2);
        let got: Vec<&str> = merged.doc_ids().collect();
        assert_eq!(got, ["d1", "d2"]);
    }

    #[test]
    fn oracle_merge_fills_nonrelevant_slots_with_semantic_relevant() {
        let lexical = list_of(&[
            ("d1", 5.0),
            ("dx", 4.0),
            ("d2", 3.0),
            ("dy", 2.0),
            ("dz", 1.0),
        ]);
        let semantic = list_of(&[("d7", 0.9), ("d8", 0.8), ("d9", 0.7), ("d1", 0.6)]);
        let relevant: HashSet<String> = ["d1", "d2", "d7", "d8", "d9"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let merged = oracle_merge(&lexical, &semantic, &relevant, 5);
        let got: HashSet<&str> = merged.doc_ids().collect();
        assert_eq!(
            got,
            ["d1", "d2", "d7", "d8", "d9"].iter().copied().collect::<HashSet<_>>()
        );
        assert_eq!(merged.len(), 5);
    }

    #[test]
    fn oracle_merge_pads_a_short_lexical_list() {
        let lexical = list_of(&[("dx", 2.0)]);
        let semantic = list_of(&[("d7", 0.9), ("d8", 0.8)]);
        let relevant: HashSet<String> = ["d7", "d8"].iter().map(|s| s.to_string()).collect();
        let merged = oracle_merge(&lexical, &semantic, &relevant, 3);
        let got: Vec<&str> = merged.doc_ids().collect();
        // dx replaced by d7, d8 appended into the free slot.
        assert_eq!(got.len(), 2);
        assert!(got.contains(&"d7") && got.contains(&"d8"));
    }

    #[test]
    fn oracle_merge_never_lowers_recall_on_random_triples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for case in 0..100 {
            let c = rng.gen_range(1..=12);
            let universe: Vec<String> = (0..30).map(|i| format!("d{i:02}")).collect();
            let pick = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<String> {
                let mut pool = universe.clone();
                let mut out = Vec::new();
                for _ in 0..n.min(pool.len()) {
                    out.push(pool.remove(rng.gen_range(0..pool.len())));
                }
                out
            };
            let lex_n = rng.gen_range(0..=c);
            let sem_n = rng.gen_range(0..=c);
            let lexical = ScoredList::from_ranked(
                pick(&mut rng, lex_n)
                    .into_iter()
                    .enumerate()
                    .map(|(i, d)| (d, (lex_n - i) as f64))
                    .collect(),
            );
            let semantic = ScoredList::from_ranked(
                pick(&mut rng, sem_n)
                    .into_iter()
                    .enumerate()
                    .map(|(i, d)| (d, (sem_n - i) as f64))
                    .collect(),
            );
            let relevant: HashSet<String> = universe
                .iter()
                .filter(|_| rng.gen_bool(0.3))
                .cloned()
                .collect();

            let merged = oracle_merge(&lexical, &semantic, &relevant, c);
            let rel_in = |list: &ScoredList| {
                list.doc_ids().filter(|d| relevant.contains(*d)).count()
            };
            assert!(merged.len() <= c);
            assert!(
                rel_in(&merged) >= rel_in(&lexical),
                "case {case}: recall dropped"
            );
            // Every lexical relevant doc must survive.
            for d in lexical.doc_ids() {
                if relevant.contains(d) {
                    assert!(merged.contains(d), "case {case}: lost {d}");
                }
            }
        }
    }
}
