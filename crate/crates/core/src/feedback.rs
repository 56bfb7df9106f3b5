//! Relevance models (RM1/RM3) induced from a feedback result list, and
//! relevance-model document scoring.
//!
//! RM1 weighs each feedback document by its Dirichlet-smoothed query
//! likelihood and mixes the documents' term distributions:
//!
//! ```text
//! P(w|R) ∝ Σ_{d ∈ top fb_docs} P_mle(w|d) · P(q|d)
//! P(q|d) = Π_{t ∈ q} P_dirichlet(t|d; μ)
//! ```
//!
//! truncated to the top `fb_terms` terms and renormalized. RM3 interpolates
//! the original query's MLE distribution back in. Documents are ranked by
//! negative cross-entropy between the model and the document's smoothed
//! language model: `Σ_w P'(w) · ln P_dirichlet(w|d; μ)` (higher is better;
//! values are ≤ 0).

use serde::{Deserialize, Serialize};

use crate::lexical::{LexicalIndex, ScoredList};
use crate::{Error, Result};

/// Which construction produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Rm1,
    Rm3,
}

/// A term probability distribution: entries sorted by descending
/// probability (ties by ascending term), summing to 1 within 1e-9,
/// every probability > 0, at most `fb_terms` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceModel {
    weights: Vec<(String, f64)>,
    pub fb_terms: usize,
    pub origin: Origin,
}

impl RelevanceModel {
    /// Build a model from raw weights, validating the invariants.
    pub fn from_weights(
        weights: Vec<(String, f64)>,
        fb_terms: usize,
        origin: Origin,
    ) -> Result<RelevanceModel> {
        if weights.is_empty() || weights.len() > fb_terms {
            return Err(Error::DegenerateModel(format!(
                "{} entries for fb_terms={fb_terms}",
                weights.len()
            )));
        }
        let sum: f64 = weights.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::DegenerateModel(format!("weights sum to {sum}, not 1")));
        }
        if weights.iter().any(|&(_, p)| p <= 0.0) {
            return Err(Error::DegenerateModel("non-positive probability".to_string()));
        }
        let mut weights = weights;
        sort_weights(&mut weights);
        Ok(RelevanceModel {
            weights,
            fb_terms,
            origin,
        })
    }

    /// Entries in rank order (descending probability, ties ascending term).
    pub fn weights(&self) -> &[(String, f64)] {
        &self.weights
    }

    pub fn prob(&self, term: &str) -> f64 {
        self.weights
            .iter()
            .find(|(t, _)| t == term)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Model terms absent from the collection (zero collection frequency).
    /// [`rm_score`] must skip them (they cannot be smoothed), so callers
    /// that want to surface the condition can warn once per model.
    pub fn unsmoothable_terms<'a>(&'a self, index: &LexicalIndex) -> Vec<&'a str> {
        self.weights
            .iter()
            .map(|(t, _)| t.as_str())
            .filter(|t| index.cf(t) == 0)
            .collect()
    }
}

fn sort_weights(weights: &mut [(String, f64)]) {
    weights.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Dirichlet-smoothed term probability under a document's language model:
/// `(tf(w,d) + μ·P(w|C)) / (|d| + μ)`.
fn dirichlet_prob(tf: u32, doc_len: u32, coll_prob: f64, mu: f64) -> f64 {
    (tf as f64 + mu * coll_prob) / (doc_len as f64 + mu)
}

/// Induce an RM1 model from the top `fb_docs` entries of a result list.
///
/// Query terms with zero collection frequency are skipped inside the query
/// likelihood (an out-of-vocabulary term would otherwise zero every
/// document's weight). Likelihoods are computed in log space.
pub fn induce_rm1(
    index: &LexicalIndex,
    query: &crate::corpus::Query,
    list: &ScoredList,
    fb_docs: usize,
    fb_terms: usize,
    mu: f64,
) -> Result<RelevanceModel> {
    if list.is_empty() {
        return Err(Error::DegenerateModel("empty feedback list".to_string()));
    }
    if fb_docs == 0 {
        return Err(Error::invalid_param("fb_docs", "must be > 0"));
    }
    if fb_terms == 0 {
        return Err(Error::invalid_param("fb_terms", "must be > 0"));
    }
    if mu <= 0.0 {
        return Err(Error::invalid_param("mu", "must be > 0"));
    }

    let top: Vec<&str> = list.doc_ids().take(fb_docs).collect();

    // Log query likelihood per feedback document.
    let mut loglik = Vec::with_capacity(top.len());
    for doc_id in &top {
        let len = index.doc_len(doc_id)?;
        let mut ll = 0.0;
        for t in &query.tokens {
            let cf = index.cf(t);
            if cf == 0 {
                continue;
            }
            ll += dirichlet_prob(index.tf(t, doc_id), len, index.collection_prob(t), mu).ln();
        }
        loglik.push(ll);
    }
    let max_ll = loglik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Weighted mixture of the documents' MLE term distributions.
    let mut acc: std::collections::HashMap<String, f64> = std::collections::HashMap::new();
    for (doc_id, &ll) in top.iter().zip(&loglik) {
        let w = (ll - max_ll).exp();
        let len = index.doc_len(doc_id)? as f64;
        if len == 0.0 {
            continue;
        }
        for (term, tf) in index.doc_terms(doc_id)? {
            *acc.entry(term.to_string()).or_insert(0.0) += w * tf as f64 / len;
        }
    }
    let mut weights: Vec<(String, f64)> = acc.into_iter().collect();
    sort_weights(&mut weights);
    weights.truncate(fb_terms);
    let total: f64 = weights.iter().map(|(_, p)| p).sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateModel(
            "feedback documents produced no probability mass".to_string(),
        ));
    }
    for w in &mut weights {
        w.1 /= total;
    }
    RelevanceModel::from_weights(weights, fb_terms, Origin::Rm1)
}

/// Interpolate RM1 with the query's own MLE term distribution:
/// `P'(w) = (1−alpha)·P_mle(w|q) + alpha·P_rm1(w)`.
///
/// Zero-weight terms are dropped, so `alpha = 0` recovers the query model
/// exactly and `alpha = 1` recovers RM1 exactly. The result's `fb_terms`
/// bound is `rm1.fb_terms` plus the number of distinct query terms.
pub fn interpolate_rm3(
    rm1: &RelevanceModel,
    query: &crate::corpus::Query,
    alpha: f64,
) -> Result<RelevanceModel> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid_param(
            "alpha",
            format!("must be within [0, 1], got {alpha}"),
        ));
    }
    if query.tokens.is_empty() {
        return Err(Error::DegenerateModel(
            "cannot interpolate with an empty query".to_string(),
        ));
    }
    let mut counts: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for t in &query.tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let qlen = query.tokens.len() as f64;
    let distinct_q = counts.len();

    let mut mix: std::collections::HashMap<String, f64> = std::collections::HashMap::new();
    for (t, n) in counts {
        let p = (1.0 - alpha) * n as f64 / qlen;
        if p > 0.0 {
            mix.insert(t.to_string(), p);
        }
    }
    for (t, p) in rm1.weights() {
        let p = alpha * p;
        if p > 0.0 {
            *mix.entry(t.clone()).or_insert(0.0) += p;
        }
    }
    let weights: Vec<(String, f64)> = mix.into_iter().collect();
    RelevanceModel::from_weights(weights, rm1.fb_terms + distinct_q, Origin::Rm3)
}

/// Score a document under a relevance model: `Σ_w P'(w)·ln P_dir(w|d;μ)`.
/// Model terms with zero collection frequency are excluded (they cannot be
/// smoothed); see [`RelevanceModel::unsmoothable_terms`]. The score is
/// finite for every indexed document, including ones containing none of
/// the model terms.
pub fn rm_score(index: &LexicalIndex, rm: &RelevanceModel, doc_id: &str, mu: f64) -> Result<f64> {
    if mu <= 0.0 {
        return Err(Error::invalid_param("mu", "must be > 0"));
    }
    let len = index.doc_len(doc_id)?;
    let mut score = 0.0;
    for (term, p) in rm.weights() {
        if index.cf(term) == 0 {
            continue;
        }
        let pd = dirichlet_prob(index.tf(term, doc_id), len, index.collection_prob(term), mu);
        score += p * pd.ln();
    }
    Ok(score)
}
