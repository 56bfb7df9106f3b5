//! Rank-based evaluation and run analysis: recall and MAP at depth,
//! reliability of improvement, quartile breakdowns, improvement
//! histograms, query idf statistics, representative terms, and relevant
//! document length profiles, plus TREC-format qrels/run I/O.
//!
//! Judgments are binary; graded judgments collapse to relevant at grade
//! one or higher, and unjudged documents count as non-relevant. Queries
//! with no relevant documents are excluded from aggregates and reported
//! by id instead.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Query;
use crate::lexical::{LexicalIndex, ScoredList};
use crate::{Error, Result};

/// Binary relevance judgments: query id to the set of relevant doc ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    relevant: HashMap<String, HashSet<String>>,
}

impl Qrels {
    /// Collect judgments, keeping pairs with relevance ≥ 1.
    pub fn from_judgments<I>(judgments: I) -> Qrels
    where
        I: IntoIterator<Item = (String, String, i32)>,
    {
        let mut relevant: HashMap<String, HashSet<String>> = HashMap::new();
        for (qid, did, rel) in judgments {
            if rel >= 1 {
                relevant.entry(qid).or_default().insert(did);
            }
        }
        Qrels { relevant }
    }

    /// Parse TREC qrels lines: `qid 0 docid rel`, whitespace separated.
    pub fn read_trec(path: &Path) -> Result<Qrels> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut judgments = Vec::new();
        for (no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = no + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 4 fields, got {}", fields.len()),
                ));
            }
            let rel: i32 = fields[3]
                .parse()
                .map_err(|e| Error::parse(path, lineno, format!("bad relevance: {e}")))?;
            judgments.push((fields[0].to_string(), fields[2].to_string(), rel));
        }
        Ok(Qrels::from_judgments(judgments))
    }

    pub fn relevant(&self, query_id: &str) -> Option<&HashSet<String>> {
        self.relevant.get(query_id)
    }

    pub fn n_relevant(&self, query_id: &str) -> usize {
        self.relevant.get(query_id).map_or(0, HashSet::len)
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.relevant
            .get(query_id)
            .is_some_and(|s| s.contains(doc_id))
    }

    /// Query ids with at least one relevant document, sorted.
    pub fn query_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.relevant.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }
}

/// A named multi-query run: one ranked list per query id.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub tag: String,
    pub lists: BTreeMap<String, ScoredList>,
}

impl Run {
    pub fn new(tag: impl Into<String>) -> Run {
        Run {
            tag: tag.into(),
            lists: BTreeMap::new(),
        }
    }

    /// Parse a TREC run file: `qid Q0 docid rank score tag`. Lines are
    /// reordered by the rank field within each query.
    pub fn read_trec(path: &Path) -> Result<Run> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut tag = String::new();
        let mut per_query: BTreeMap<String, Vec<(usize, String, f64)>> = BTreeMap::new();
        for (no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = no + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 6 fields, got {}", fields.len()),
                ));
            }
            let rank: usize = fields[3]
                .parse()
                .map_err(|e| Error::parse(path, lineno, format!("bad rank: {e}")))?;
            let score: f64 = fields[4]
                .parse()
                .map_err(|e| Error::parse(path, lineno, format!("bad score: {e}")))?;
            if tag.is_empty() {
                tag = fields[5].to_string();
            }
            per_query
                .entry(fields[0].to_string())
                .or_default()
                .push((rank, fields[2].to_string(), score));
        }
        let mut lists = BTreeMap::new();
        for (qid, mut rows) in per_query {
            rows.sort_by_key(|&(rank, ..)| rank);
            let mut seen = HashSet::new();
            for (_, did, _) in &rows {
                if !seen.insert(did.clone()) {
                    return Err(Error::file_format(
                        path,
                        format!("query {qid} lists document {did} twice"),
                    ));
                }
            }
            lists.insert(
                qid,
                ScoredList::from_ranked(rows.into_iter().map(|(_, d, s)| (d, s)).collect()),
            );
        }
        Ok(Run { tag, lists })
    }

    /// Write TREC run lines, ranks from 1, scores with six decimals.
    pub fn write_trec(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (qid, list) in &self.lists {
            for (rank, entry) in list.iter().enumerate() {
                writeln!(
                    w,
                    "{qid} Q0 {} {} {:.6} {}",
                    entry.doc_id,
                    rank + 1,
                    entry.score,
                    self.tag
                )
                .map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Fraction of the query's relevant documents found in the top `c`.
/// `None` when the query has no relevant documents (undefined).
pub fn recall_at(list: &ScoredList, qrels: &Qrels, query_id: &str, c: usize) -> Option<f64> {
    let rel = qrels.relevant(query_id)?;
    if rel.is_empty() {
        return None;
    }
    let hit = list
        .doc_ids()
        .take(c)
        .filter(|d| rel.contains(*d))
        .count();
    Some(hit as f64 / rel.len() as f64)
}

/// Average precision at depth `c`: the mean over ALL relevant documents
/// of precision at each relevant rank within the top `c` (relevant
/// documents outside the top `c` contribute zero). `None` when the query
/// has no relevant documents.
pub fn map_at(list: &ScoredList, qrels: &Qrels, query_id: &str, c: usize) -> Option<f64> {
    let rel = qrels.relevant(query_id)?;
    if rel.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in list.doc_ids().take(c).enumerate() {
        if rel.contains(d) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / rel.len() as f64)
}

/// `(improved − degraded) / total` over per-query metric deltas; zero
/// deltas count in neither direction.
pub fn reliability_of_improvement(deltas: &[f64]) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::invalid_param("deltas", "need at least one query"));
    }
    let improved = deltas.iter().filter(|&&d| d > 0.0).count() as i64;
    let degraded = deltas.iter().filter(|&&d| d < 0.0).count() as i64;
    Ok((improved - degraded) as f64 / deltas.len() as f64)
}

/// Per-query metric values inside an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub recall: f64,
    pub map: f64,
    pub n_relevant: usize,
    pub relevant_retrieved: usize,
}

/// One run evaluated at one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tag: String,
    pub c: usize,
    pub per_query: BTreeMap<String, QueryEval>,
    pub mean_recall: f64,
    pub mean_map: f64,
    pub total_relevant_retrieved: usize,
    /// Queries present in the run but without relevant documents; they
    /// are excluded from every aggregate above.
    pub skipped_no_relevant: Vec<String>,
}

/// Score a run against judgments at depth `c`. Errors when no query is
/// evaluable.
pub fn evaluate_run(run: &Run, qrels: &Qrels, c: usize) -> Result<EvalReport> {
    if c == 0 {
        return Err(Error::invalid_param("c", "must be > 0"));
    }
    let mut per_query = BTreeMap::new();
    let mut skipped = Vec::new();
    for (qid, list) in &run.lists {
        let n_relevant = qrels.n_relevant(qid);
        if n_relevant == 0 {
            skipped.push(qid.clone());
            continue;
        }
        let recall = recall_at(list, qrels, qid, c).expect("relevant set checked above");
        let map = map_at(list, qrels, qid, c).expect("relevant set checked above");
        let relevant_retrieved = (recall * n_relevant as f64).round() as usize;
        per_query.insert(
            qid.clone(),
            QueryEval {
                recall,
                map,
                n_relevant,
                relevant_retrieved,
            },
        );
    }
    if per_query.is_empty() {
        return Err(Error::invalid_param(
            "run",
            "no query has relevant documents in the qrels",
        ));
    }
    let n = per_query.len() as f64;
    Ok(EvalReport {
        tag: run.tag.clone(),
        c,
        mean_recall: per_query.values().map(|q| q.recall).sum::<f64>() / n,
        mean_map: per_query.values().map(|q| q.map).sum::<f64>() / n,
        total_relevant_retrieved: per_query.values().map(|q| q.relevant_retrieved).sum(),
        per_query,
        skipped_no_relevant: skipped,
    })
}

/// Two evaluated runs side by side, over their common queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub queries: usize,
    /// Counts of recall deltas by sign.
    pub improved: usize,
    pub degraded: usize,
    pub unchanged: usize,
    pub recall_ri: f64,
    pub map_ri: f64,
    pub mean_recall_delta: f64,
    pub mean_map_delta: f64,
}

/// Compare a test report against a baseline evaluated at the same depth.
pub fn compare_runs(baseline: &EvalReport, test: &EvalReport) -> Result<RunComparison> {
    if baseline.c != test.c {
        return Err(Error::invalid_param(
            "c",
            format!("reports evaluated at different depths ({} vs {})", baseline.c, test.c),
        ));
    }
    let mut recall_deltas = Vec::new();
    let mut map_deltas = Vec::new();
    for (qid, b) in &baseline.per_query {
        if let Some(t) = test.per_query.get(qid) {
            recall_deltas.push(t.recall - b.recall);
            map_deltas.push(t.map - b.map);
        }
    }
    if recall_deltas.is_empty() {
        return Err(Error::invalid_param("runs", "no common evaluable queries"));
    }
    let n = recall_deltas.len();
    Ok(RunComparison {
        queries: n,
        improved: recall_deltas.iter().filter(|&&d| d > 0.0).count(),
        degraded: recall_deltas.iter().filter(|&&d| d < 0.0).count(),
        unchanged: recall_deltas.iter().filter(|&&d| d == 0.0).count(),
        recall_ri: reliability_of_improvement(&recall_deltas)?,
        map_ri: reliability_of_improvement(&map_deltas)?,
        mean_recall_delta: recall_deltas.iter().sum::<f64>() / n as f64,
        mean_map_delta: map_deltas.iter().sum::<f64>() / n as f64,
    })
}

/// One quartile's size and mean recalls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileGroup {
    pub n: usize,
    pub baseline_mean: f64,
    pub test_mean: f64,
}

/// Per-query recall of the baseline's evaluable queries, also looking up
/// the same query in the test run (0 when the test run misses it).
fn paired_recalls(
    baseline: &Run,
    test: &Run,
    qrels: &Qrels,
    c: usize,
) -> Vec<(String, f64, f64)> {
    let mut rows = Vec::new();
    for (qid, list) in &baseline.lists {
        let Some(base) = recall_at(list, qrels, qid, c) else {
            continue;
        };
        let t = test
            .lists
            .get(qid)
            .and_then(|l| recall_at(l, qrels, qid, c))
            .unwrap_or(0.0);
        rows.push((qid.clone(), base, t));
    }
    rows
}

/// Sort the baseline's evaluable queries by baseline recall, split them
/// into four groups (sizes differing by at most one, the extra queries
/// going to the lower-recall groups), and average both runs' recall in
/// each group.
pub fn quartile_analysis(
    baseline: &Run,
    test: &Run,
    qrels: &Qrels,
    c: usize,
) -> Result<[QuartileGroup; 4]> {
    let mut rows = paired_recalls(baseline, test, qrels, c);
    if rows.len() < 4 {
        return Err(Error::invalid_param(
            "queries",
            format!("need at least 4 evaluable queries, have {}", rows.len()),
        ));
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    let n = rows.len();
    let base_size = n / 4;
    let remainder = n % 4;
    let mut groups = Vec::with_capacity(4);
    let mut start = 0usize;
    for g in 0..4 {
        let size = base_size + usize::from(g < remainder);
        let slice = &rows[start..start + size];
        start += size;
        groups.push(QuartileGroup {
            n: size,
            baseline_mean: slice.iter().map(|r| r.1).sum::<f64>() / size as f64,
            test_mean: slice.iter().map(|r| r.2).sum::<f64>() / size as f64,
        });
    }
    Ok(groups.try_into().expect("exactly four groups"))
}

/// Counts of queries by percentage recall change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementHistogram {
    /// Ascending bucket boundaries, in percent.
    pub edges: Vec<f64>,
    /// `edges.len() + 1` counts: below the first edge, between
    /// consecutive edges, and at or above the last edge.
    pub counts: Vec<usize>,
    /// Queries whose recall did not change; kept out of `counts`.
    pub zeros: usize,
}

impl ImprovementHistogram {
    pub fn total(&self) -> usize {
        self.zeros + self.counts.iter().sum::<usize>()
    }
}

/// Bucket the per-query percentage recall change of `test` against
/// `baseline`. Zero change gets its own bucket. A query going from zero
/// to positive recall counts as an unbounded gain and lands in the top
/// bucket.
pub fn improvement_histogram(
    baseline: &Run,
    test: &Run,
    qrels: &Qrels,
    c: usize,
    edges: &[f64],
) -> Result<ImprovementHistogram> {
    if edges.is_empty() {
        return Err(Error::invalid_param("edges", "need at least one edge"));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid_param(
            "edges",
            "must be finite and strictly ascending",
        ));
    }
    let mut counts = vec![0usize; edges.len() + 1];
    let mut zeros = 0usize;
    for (_, base, t) in paired_recalls(baseline, test, qrels, c) {
        if t == base {
            zeros += 1;
            continue;
        }
        let pct = if base > 0.0 {
            (t - base) / base * 100.0
        } else {
            f64::INFINITY
        };
        let bucket = edges.iter().position(|&e| pct < e).unwrap_or(edges.len());
        counts[bucket] += 1;
    }
    Ok(ImprovementHistogram {
        edges: edges.to_vec(),
        counts,
        zeros,
    })
}

/// Summary statistics of a query's per-term idf values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryProperties {
    pub n_terms: usize,
    pub mean_idf: f64,
    pub max_idf: f64,
    /// Population standard deviation.
    pub std_idf: f64,
}

pub fn query_properties(query: &Query, index: &LexicalIndex) -> Result<QueryProperties> {
    if query.tokens.is_empty() {
        return Err(Error::invalid_param("query", "has no tokens"));
    }
    let idfs: Vec<f64> = query.tokens.iter().map(|t| index.idf(t)).collect();
    let n = idfs.len() as f64;
    let mean = idfs.iter().sum::<f64>() / n;
    let var = idfs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(QueryProperties {
        n_terms: idfs.len(),
        mean_idf: mean,
        max_idf: idfs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        std_idf: var.sqrt(),
    })
}

/// The doc set's `n` strongest terms by summed tf·idf, ties by ascending
/// term. Returns every term of the set when it has fewer than `n`.
pub fn representative_terms(
    doc_ids: &[&str],
    index: &LexicalIndex,
    n: usize,
) -> Result<Vec<String>> {
    if doc_ids.is_empty() {
        return Err(Error::invalid_param("doc_ids", "need at least one document"));
    }
    if n == 0 {
        return Err(Error::invalid_param("n", "must be > 0"));
    }
    let mut weight: HashMap<&str, f64> = HashMap::new();
    for doc_id in doc_ids {
        for (term, tf) in index.doc_terms(doc_id)? {
            *weight.entry(term).or_insert(0.0) += tf as f64 * index.idf(term);
        }
    }
    let mut ranked: Vec<(&str, f64)> = weight.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(n);
    Ok(ranked.into_iter().map(|(t, _)| t.to_string()).collect())
}

/// Set overlap of two term lists: `|A∩B| / |A∪B|`. Two empty lists count
/// as identical (1.0).
pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    let sa: HashSet<&str> = a.iter().map(String::as_str).collect();
    let sb: HashSet<&str> = b.iter().map(String::as_str).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Pool each run's relevant documents (up to `per_query` per query, in
/// rank order), look up their token lengths, and sort each pool
/// ascending. The two sequences are what a length scatter plot compares.
pub fn relevant_length_profile(
    run_a: &Run,
    run_b: &Run,
    qrels: &Qrels,
    index: &LexicalIndex,
    per_query: usize,
) -> Result<(Vec<u32>, Vec<u32>)> {
    if per_query == 0 {
        return Err(Error::invalid_param("per_query", "must be > 0"));
    }
    let pool = |run: &Run| -> Result<Vec<u32>> {
        let mut lengths = Vec::new();
        for (qid, list) in &run.lists {
            if qrels.n_relevant(qid) == 0 {
                continue;
            }
            for d in list
                .doc_ids()
                .filter(|d| qrels.is_relevant(qid, d))
                .take(per_query)
            {
                lengths.push(index.doc_len(d)?);
            }
        }
        lengths.sort_unstable();
        Ok(lengths)
    };
    Ok((pool(run_a)?, pool(run_b)?))
}

/// Render two length sequences as a two-column CSV with a header; short
/// columns leave trailing cells empty.
pub fn lengths_csv(label_a: &str, a: &[u32], label_b: &str, b: &[u32]) -> String {
    let mut out = format!("index,{label_a},{label_b}\n");
    for i in 0..a.len().max(b.len()) {
        let cell = |v: Option<&u32>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", i + 1, cell(a.get(i)), cell(b.get(i))));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use rand::{Rng, SeedableRng};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn list_of(ids: &[&str]) -> ScoredList {
        ScoredList::from_ranked(
            ids.iter()
                .enumerate()
                .map(|(i, d)| (d.to_string(), (ids.len() - i) as f64))
                .collect(),
        )
    }

    fn qrels_for(qid: &str, rel: &[&str]) -> Qrels {
        Qrels::from_judgments(rel.iter().map(|d| (qid.to_string(), d.to_string(), 1)))
    }

    #[test]
    fn recall_covers_the_worked_cases() {
        let qrels = qrels_for("q", &["d1", "d2", "d3"]);
        let full = list_of(&["d1", "d2", "d3"]);
        assert_eq!(recall_at(&full, &qrels, "q", 10), Some(1.0));
        let none = list_of(&["x1", "x2"]);
        assert_eq!(recall_at(&none, &qrels, "q", 10), Some(0.0));

        let seven = qrels_for("q", &["d1", "d2", "d3", "d4", "d5", "d6", "d7"]);
        let three = list_of(&["d1", "x", "d2", "y", "d3"]);
        let r = recall_at(&three, &seven, "q", 10).unwrap();
        assert!((r - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn recall_honors_the_depth_cut() {
        let qrels = qrels_for("q", &["d1", "d2"]);
        let list = list_of(&["x", "d1", "d2"]);
        assert_eq!(recall_at(&list, &qrels, "q", 2), Some(0.5));
        assert_eq!(recall_at(&list, &qrels, "q", 1), Some(0.0));
    }

    #[test]
    fn recall_is_undefined_without_relevant_docs() {
        let qrels = Qrels::default();
        assert_eq!(recall_at(&list_of(&["d1"]), &qrels, "q", 5), None);
        assert_eq!(map_at(&list_of(&["d1"]), &qrels, "q", 5), None);
    }

    #[test]
    fn map_covers_the_worked_cases() {
        let one = qrels_for("q", &["d1"]);
        assert_eq!(map_at(&list_of(&["d1", "x"]), &one, "q", 10), Some(1.0));
        assert_eq!(map_at(&list_of(&["x", "d1"]), &one, "q", 10), Some(0.5));

        // Relevant at ranks 1, 3, 5 with four relevant in total:
        // (1/4)(1/1 + 2/3 + 3/5).
        let four = qrels_for("q", &["d1", "d2", "d3", "d4"]);
        let list = list_of(&["d1", "x", "d2", "y", "d3"]);
        let m = map_at(&list, &four, "q", 10).unwrap();
        assert!((m - (1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 4.0).abs() < 1e-12);
        assert!((m - 17.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_match_a_brute_force_transcription_on_random_runs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n_docs = rng.gen_range(1..40);
            let docs: Vec<String> = (0..n_docs).map(|i| format!("d{i}")).collect();
            let rel: Vec<&str> = docs
                .iter()
                .filter(|_| rng.gen_bool(0.3))
                .map(String::as_str)
                .collect();
            if rel.is_empty() {
                continue;
            }
            let mut order = docs.clone();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let keep = rng.gen_range(0..=order.len());
            let listed: Vec<&str> = order.iter().take(keep).map(String::as_str).collect();
            let c = rng.gen_range(1..50);

            let qrels = qrels_for("q", &rel);
            let list = list_of(&listed);

            // Oracle: direct transcription of the definitions.
            let rel_set: HashSet<&str> = rel.iter().copied().collect();
            let top: Vec<&str> = listed.iter().take(c).copied().collect();
            let want_recall =
                top.iter().filter(|d| rel_set.contains(*d)).count() as f64 / rel.len() as f64;
            let mut seen = 0;
            let mut ap = 0.0;
            for (i, d) in top.iter().enumerate() {
                if rel_set.contains(d) {
                    seen += 1;
                    ap += seen as f64 / (i + 1) as f64;
                }
            }
            let want_map = ap / rel.len() as f64;

            assert!((recall_at(&list, &qrels, "q", c).unwrap() - want_recall).abs() < 1e-12);
            assert!((map_at(&list, &qrels, "q", c).unwrap() - want_map).abs() < 1e-12);
        }
    }

    #[test]
    fn unjudged_docs_below_the_relevant_never_help() {
        let qrels = qrels_for("q", &["d1", "d2"]);
        let base = list_of(&["d1", "x", "d2"]);
        let padded = list_of(&["d1", "x", "d2", "u1", "u2", "u3"]);
        for c in 1..=10 {
            assert_eq!(
                recall_at(&base, &qrels, "q", c),
                recall_at(&padded, &qrels, "q", c)
            );
            assert_eq!(map_at(&base, &qrels, "q", c), map_at(&padded, &qrels, "q", c));
        }
    }

    #[test]
    fn ri_matches_the_reported_arithmetic() {
        // 121 queries: 62 improved, 12 degraded, 47 unchanged.
        let mut deltas = vec![0.1; 62];
        deltas.extend(vec![-0.1; 12]);
        deltas.extend(vec![0.0; 47]);
        let ri = reliability_of_improvement(&deltas).unwrap();
        assert!((ri - 50.0 / 121.0).abs() < 1e-12);
        assert!((ri - 0.413).abs() < 5e-4);

        assert_eq!(reliability_of_improvement(&[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(reliability_of_improvement(&[1.0, -1.0]).unwrap(), 0.0);
        assert!(reliability_of_improvement(&[]).is_err());
    }

    fn two_runs_eight_queries() -> (Run, Run, Qrels) {
        // Each query has 2 relevant docs; baseline recalls step up in
        // 0.5 increments across queries.
        let mut base = Run::new("base");
        let mut test = Run::new("test");
        let mut judgments = Vec::new();
        for i in 0..8usize {
            let qid = format!("q{i}");
            let rel = [format!("r{i}a"), format!("r{i}b")];
            for d in &rel {
                judgments.push((qid.clone(), d.clone(), 1));
            }
            let base_hits = i / 2 % 3; // 0,0,1,1,2,2,0,0 relevant retrieved
            let mut base_ids: Vec<&str> = Vec::new();
            for d in rel.iter().take(base_hits) {
                base_ids.push(d);
            }
            base_ids.push("filler1");
            base_ids.push("filler2");
            base.lists.insert(qid.clone(), list_of(&base_ids));
            // Test run always finds both.
            test.lists
                .insert(qid.clone(), list_of(&[&rel[0], &rel[1]]));
        }
        (base, test, Qrels::from_judgments(judgments))
    }

    #[test]
    fn evaluate_run_aggregates_and_flags() {
        let (base, _test, qrels) = two_runs_eight_queries();
        let mut run = base;
        run.lists.insert("orphan".to_string(), list_of(&["x"]));
        let report = evaluate_run(&run, &qrels, 100).unwrap();
        assert_eq!(report.per_query.len(), 8);
        assert_eq!(report.skipped_no_relevant, vec!["orphan".to_string()]);
        // Retrieved: queries contribute 0,0,1,1,2,2,0,0 relevant docs.
        assert_eq!(report.total_relevant_retrieved, 6);
        let want_mean = (0.0 + 0.0 + 0.5 + 0.5 + 1.0 + 1.0 + 0.0 + 0.0) / 8.0;
        assert!((report.mean_recall - want_mean).abs() < 1e-12);
    }

    #[test]
    fn compare_runs_counts_signs_and_ri() {
        let (base, test, qrels) = two_runs_eight_queries();
        let rb = evaluate_run(&base, &qrels, 100).unwrap();
        let rt = evaluate_run(&test, &qrels, 100).unwrap();
        let cmp = compare_runs(&rb, &rt).unwrap();
        assert_eq!(cmp.queries, 8);
        assert_eq!(cmp.improved, 6);
        assert_eq!(cmp.degraded, 0);
        assert_eq!(cmp.unchanged, 2);
        assert!((cmp.recall_ri - 6.0 / 8.0).abs() < 1e-12);
        assert!(compare_runs(&rb, &evaluate_run(&test, &qrels, 50).unwrap()).is_err());
    }

    #[test]
    fn quartiles_match_hand_computation_on_eight_queries() {
        let (base, test, qrels) = two_runs_eight_queries();
        let groups = quartile_analysis(&base, &test, &qrels, 100).unwrap();
        assert!(groups.iter().all(|g| g.n == 2));
        // Sorted baseline recalls: 0,0,0,0,0.5,0.5,1,1.
        assert_eq!(groups[0].baseline_mean, 0.0);
        assert_eq!(groups[1].baseline_mean, 0.0);
        assert!((groups[2].baseline_mean - 0.5).abs() < 1e-12);
        assert!((groups[3].baseline_mean - 1.0).abs() < 1e-12);
        assert!(groups.iter().all(|g| (g.test_mean - 1.0).abs() < 1e-12));
    }

    #[test]
    fn quartiles_are_identical_for_identical_runs_and_rank_invariant() {
        let (base, _test, qrels) = two_runs_eight_queries();
        let same = quartile_analysis(&base, &base, &qrels, 100).unwrap();
        for g in &same {
            assert_eq!(g.baseline_mean, g.test_mean);
        }
        // Rescaling scores monotonically keeps every ranking, so the
        // analysis cannot change.
        let mut scaled = base.clone();
        for list in scaled.lists.values_mut() {
            let bumped: Vec<(String, f64)> = list
                .iter()
                .map(|e| (e.doc_id.clone(), e.score * 7.0 + 3.0))
                .collect();
            *list = ScoredList::from_ranked(bumped);
        }
        let vs_scaled = quartile_analysis(&base, &scaled, &qrels, 100).unwrap();
        assert_eq!(same, vs_scaled);
    }

    #[test]
    fn quartiles_put_the_remainder_in_the_lower_groups() {
        let (mut base, mut test, qrels) = two_runs_eight_queries();
        let mut judgments = Vec::new();
        for i in 8..10usize {
            let qid = format!("q{i}");
            judgments.push((qid.clone(), format!("r{i}a"), 1));
            base.lists.insert(qid.clone(), list_of(&["filler"]));
            test.lists.insert(qid, list_of(&["filler"]));
        }
        let mut qrels2 = qrels.clone();
        for (q, d, r) in judgments {
            qrels2 = Qrels::from_judgments(
                qrels2
                    .query_ids()
                    .iter()
                    .flat_map(|qid| {
                        qrels2
                            .relevant(qid)
                            .unwrap()
                            .iter()
                            .map(|doc| (qid.to_string(), doc.clone(), 1))
                            .collect::<Vec<_>>()
                    })
                    .chain(std::iter::once((q.clone(), d.clone(), r))),
            );
        }
        let groups = quartile_analysis(&base, &test, &qrels2, 100).unwrap();
        let sizes: Vec<usize> = groups.iter().map(|g| g.n).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        assert!(quartile_analysis(&Run::new("a"), &test, &qrels2, 100).is_err());
    }

    #[test]
    fn histogram_buckets_the_worked_fixture() {
        // q0: +10%, q1: −5%, q2: 0%.
        let mut judgments = Vec::new();
        let mut base = Run::new("b");
        let mut test = Run::new("t");
        // q0: 10 relevant docs; base finds 5, test 5.5 is impossible, so
        // use 10 rel, base 5, test 5*1.1 not integral either; instead use
        // base 10 of 20, test 11 of 20 (+10%).
        for i in 0..20 {
            judgments.push(("q0".to_string(), format!("a{i:02}"), 1));
        }
        let base_ids: Vec<String> = (0..10).map(|i| format!("a{i:02}")).collect();
        let test_ids: Vec<String> = (0..11).map(|i| format!("a{i:02}")).collect();
        base.lists.insert(
            "q0".into(),
            list_of(&base_ids.iter().map(String::as_str).collect::<Vec<_>>()),
        );
        test.lists.insert(
            "q0".into(),
            list_of(&test_ids.iter().map(String::as_str).collect::<Vec<_>>()),
        );
        // q1: 20 relevant, base 20, test 19 (−5%).
        for i in 0..20 {
            judgments.push(("q1".to_string(), format!("b{i:02}"), 1));
        }
        let base_ids: Vec<String> = (0..20).map(|i| format!("b{i:02}")).collect();
        let test_ids: Vec<String> = (0..19).map(|i| format!("b{i:02}")).collect();
        base.lists.insert(
            "q1".into(),
            list_of(&base_ids.iter().map(String::as_str).collect::<Vec<_>>()),
        );
        test.lists.insert(
            "q1".into(),
            list_of(&test_ids.iter().map(String::as_str).collect::<Vec<_>>()),
        );
        // q2: unchanged.
        judgments.push(("q2".to_string(), "c00".to_string(), 1));
        base.lists.insert("q2".into(), list_of(&["c00"]));
        test.lists.insert("q2".into(), list_of(&["c00"]));

        let qrels = Qrels::from_judgments(judgments);
        let h = improvement_histogram(&base, &test, &qrels, 100, &[-1.0, 1.0]).unwrap();
        assert_eq!(h.counts, vec![1, 0, 1]);
        assert_eq!(h.zeros, 1);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn histogram_sends_gains_from_zero_to_the_top_bucket() {
        let qrels = qrels_for("q0", &["d1"]);
        let mut base = Run::new("b");
        let mut test = Run::new("t");
        base.lists.insert("q0".into(), list_of(&["x"]));
        test.lists.insert("q0".into(), list_of(&["d1"]));
        let h = improvement_histogram(&base, &test, &qrels, 10, &[-50.0, 0.0, 50.0]).unwrap();
        assert_eq!(h.counts, vec![0, 0, 0, 1]);

        assert!(improvement_histogram(&base, &test, &qrels, 10, &[]).is_err());
        assert!(improvement_histogram(&base, &test, &qrels, 10, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn histogram_partitions_all_evaluable_queries() {
        let (base, test, qrels) = two_runs_eight_queries();
        let h = improvement_histogram(&base, &test, &qrels, 100, &[-10.0, 10.0]).unwrap();
        assert_eq!(h.total(), 8);
    }

    fn idf_fixture() -> LexicalIndex {
        // 4 docs: "common" in all, "rare" in one.
        let docs: Vec<Document> = (0..4)
            .map(|i| {
                let text = if i == 0 { "common rare extra" } else { "common filler word" };
                Document::from_tokens(format!("d{i}"), toks(text))
            })
            .collect();
        LexicalIndex::build(&docs).unwrap()
    }

    #[test]
    fn query_properties_match_hand_arithmetic() {
        let index = idf_fixture();
        let single = Query::from_tokens("q", toks("rare"));
        let p = query_properties(&single, &index).unwrap();
        assert_eq!(p.n_terms, 1);
        assert_eq!(p.std_idf, 0.0);
        assert_eq!(p.mean_idf, p.max_idf);

        // idf(common): df=4, N=4 → ln(1 + 0.5/4.5); idf(rare): df=1 →
        // ln(1 + 3.5/1.5).
        let q = Query::from_tokens("q", toks("common rare"));
        let p = query_properties(&q, &index).unwrap();
        let idf_common = (1.0f64 + 0.5 / 4.5).ln();
        let idf_rare = (1.0f64 + 3.5 / 1.5).ln();
        assert!((p.mean_idf - (idf_common + idf_rare) / 2.0).abs() < 1e-12);
        assert!((p.max_idf - idf_rare).abs() < 1e-12);
        assert!((p.std_idf - (idf_rare - idf_common) / 2.0).abs() < 1e-12);

        // Unknown term: df=0 keeps the formula finite.
        let q = Query::from_tokens("q", toks("zzzz"));
        let p = query_properties(&q, &index).unwrap();
        assert!(p.mean_idf.is_finite());
        assert!((p.mean_idf - (1.0f64 + 4.5 / 0.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn representative_terms_rank_by_summed_tf_idf() {
        let docs = vec![
            Document::from_tokens("d1", toks("apple apple pear")),
            Document::from_tokens("d2", toks("apple pear plum")),
            Document::from_tokens("d3", toks("plum plum plum grape")),
        ];
        let index = LexicalIndex::build(&docs).unwrap();
        // Hand scores over {d1, d2}: apple 3·idf(df=2), pear 2·idf(df=2),
        // plum 1·idf(df=2); idf equal, so order apple, pear, plum.
        let terms = representative_terms(&["d1", "d2"], &index, 3).unwrap();
        assert_eq!(terms, ["apple", "pear", "plum"]);
        // n beyond the set's vocabulary returns everything.
        let all = representative_terms(&["d1", "d2"], &index, 50).unwrap();
        assert_eq!(all.len(), 3);
        assert!(representative_terms(&[], &index, 3).is_err());
    }

    #[test]
    fn representative_terms_break_ties_by_ascending_term() {
        let docs = vec![Document::from_tokens("d1", toks("beta alpha"))];
        let index = LexicalIndex::build(&docs).unwrap();
        let terms = representative_terms(&["d1"], &index, 2).unwrap();
        assert_eq!(terms, ["alpha", "beta"]);
    }

    #[test]
    fn jaccard_covers_the_worked_cases() {
        let a = toks("x y z");
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&a, &toks("p q")), 0.0);
        let big_a: Vec<String> = (0..50).map(|i| format!("t{i}")).collect();
        let big_b: Vec<String> = (25..75).map(|i| format!("t{i}")).collect();
        assert!((jaccard(&big_a, &big_b) - 25.0 / 75.0).abs() < 1e-12);
        assert_eq!(jaccard(&[], &[]), 1.0);
        assert_eq!(jaccard(&a, &[]), 0.0);
    }

    #[test]
    fn length_profile_pools_and_sorts_relevant_lengths() {
        let docs = vec![
            Document::from_tokens("long", toks("a b c d e f g h")),
            Document::from_tokens("mid", toks("a b c d")),
            Document::from_tokens("short", toks("a b")),
        ];
        let index = LexicalIndex::build(&docs).unwrap();
        let qrels = qrels_for("q0", &["long", "mid", "short"]);
        let mut run_a = Run::new("a");
        run_a
            .lists
            .insert("q0".into(), list_of(&["long", "short", "nonrel"]));
        let mut run_b = Run::new("b");
        run_b.lists.insert("q0".into(), list_of(&["mid"]));

        let (a, b) = relevant_length_profile(&run_a, &run_b, &qrels, &index, 5).unwrap();
        assert_eq!(a, vec![2, 8]);
        assert_eq!(b, vec![4]);

        // per_query caps each query's contribution.
        let (a, _) = relevant_length_profile(&run_a, &run_b, &qrels, &index, 1).unwrap();
        assert_eq!(a, vec![8]);

        let csv = lengths_csv("a", &[2, 8], "b", &[4]);
        assert_eq!(csv, "index,a,b\n1,2,4\n2,8,\n");
    }

    #[test]
    fn qrels_parse_binarizes_and_reports_line_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qrels.txt");
        std::fs::write(&path, "q1 0 d1 1\nq1 0 d2 0\nq1 0 d3 2\nq2 0 d1 1\n").unwrap();
        let qrels = Qrels::read_trec(&path).unwrap();
        assert_eq!(qrels.n_relevant("q1"), 2);
        assert!(qrels.is_relevant("q1", "d3"));
        assert!(!qrels.is_relevant("q1", "d2"));
        assert_eq!(qrels.query_ids(), vec!["q1", "q2"]);

        std::fs::write(&path, "q1 0 d1\n").unwrap();
        let err = Qrels::read_trec(&path).unwrap_err().to_string();
        assert!(err.contains(":1:"), "{err}");
    }

    #[test]
    fn run_files_round_trip_through_trec_format() {
        let mut run = Run::new("mytag");
        run.lists
            .insert("q1".into(), list_of(&["d3", "d1", "d2"]));
        run.lists.insert("q2".into(), list_of(&["d9"]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        run.write_trec(&path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("q1 Q0 d3 1 3.000000 mytag\n"));

        let back = Run::read_trec(&path).unwrap();
        assert_eq!(back.tag, "mytag");
        assert_eq!(
            back.lists["q1"].doc_ids().collect::<Vec<_>>(),
            vec!["d3", "d1", "d2"]
        );

        std::fs::write(&path, "q1 Q0 d1 1 1.0 t\nq1 Q0 d1 2 0.5 t\n").unwrap();
        assert!(Run::read_trec(&path).is_err());
    }
}
