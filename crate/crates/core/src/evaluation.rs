//! Closed-set and open-set retrieval metrics, plus ARI for partitions.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::geometry::dot;
use crate::model::EmbeddingSet;
use crate::par::{self, pairwise_sum};
use crate::{Error, Result};

/// Query and gallery sets with ground-truth identities. A query is *known*
/// when its identity appears in the gallery.
#[derive(Debug, Clone)]
pub struct RetrievalProblem {
    gallery_ids: Vec<String>,
    query_ids: Vec<String>,
    known: Vec<bool>,
}

impl RetrievalProblem {
    pub fn new(gallery: &EmbeddingSet, query: &EmbeddingSet) -> Result<Self> {
        if gallery.dim() != query.dim() {
            return Err(Error::Invalid(format!(
                "gallery dimension {} != query dimension {}",
                gallery.dim(),
                query.dim()
            )));
        }
        let g = gallery.identities().ok_or(Error::MissingIdentities)?;
        let q = query.identities().ok_or(Error::MissingIdentities)?;
        Ok(Self::from_identities(g.to_vec(), q.to_vec()))
    }

    pub fn from_identities(gallery_ids: Vec<String>, query_ids: Vec<String>) -> Self {
        let present: HashSet<&String> = gallery_ids.iter().collect();
        let known = query_ids.iter().map(|q| present.contains(q)).collect();
        Self {
            gallery_ids,
            query_ids,
            known,
        }
    }

    pub fn num_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn known_flags(&self) -> &[bool] {
        &self.known
    }

    fn known_queries(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.query_ids.len()).filter(|&q| self.known[q])
    }

    fn relevant(&self, q: usize, g: usize) -> bool {
        self.query_ids[q] == self.gallery_ids[g]
    }
}

/// Per-query gallery order (descending similarity, ties by index) with the
/// matching sorted scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Rankings {
    order: Vec<Vec<usize>>,
    scores: Vec<Vec<f64>>,
}

impl Rankings {
    /// Ranks a `queries × gallery` similarity matrix.
    pub fn from_scores(scores: &[Vec<f64>]) -> Self {
        let ranked = par::map_slice(scores, |row| {
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            let sorted = idx.iter().map(|&g| row[g]).collect::<Vec<_>>();
            (idx, sorted)
        });
        let (order, scores) = ranked.into_iter().unzip();
        Self { order, scores }
    }

    pub fn order(&self, q: usize) -> &[usize] {
        &self.order[q]
    }

    /// Best gallery similarity for the query.
    pub fn top_score(&self, q: usize) -> f64 {
        self.scores[q].first().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Ranks the gallery for every query by cosine similarity.
pub fn rank_gallery(gallery: &EmbeddingSet, query: &EmbeddingSet) -> Result<Rankings> {
    if gallery.dim() != query.dim() {
        return Err(Error::Invalid("gallery and query dimensions differ".into()));
    }
    let g = gallery.unit_rows()?;
    let q = query.unit_rows()?;
    let scores = par::map_slice(&q, |qr| g.iter().map(|gr| dot(qr, gr)).collect::<Vec<_>>());
    Ok(Rankings::from_scores(&scores))
}

/// 1-based ranks of the relevant gallery entries.
fn positive_ranks(p: &RetrievalProblem, r: &Rankings, q: usize) -> Result<Vec<usize>> {
    let ranks: Vec<usize> = r
        .order(q)
        .iter()
        .enumerate()
        .filter(|&(_, &g)| p.relevant(q, g))
        .map(|(k, _)| k + 1)
        .collect();
    if ranks.is_empty() {
        return Err(Error::NoPositives(q));
    }
    Ok(ranks)
}

fn mean_over_known(
    p: &RetrievalProblem,
    per_query: impl Fn(usize) -> Result<f64>,
) -> Result<f64> {
    let values = p.known_queries().map(per_query).collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Error::NotApplicable("no known queries"));
    }
    Ok(pairwise_sum(&values) / values.len() as f64)
}

/// Average precision from 1-based positive ranks.
pub fn average_precision(positive_ranks: &[usize]) -> f64 {
    let terms: Vec<f64> = positive_ranks
        .iter()
        .enumerate()
        .map(|(hits, &rank)| (hits + 1) as f64 / rank as f64)
        .collect();
    pairwise_sum(&terms) / positive_ranks.len() as f64
}

/// mAP over known queries.
pub fn mean_average_precision(p: &RetrievalProblem, r: &Rankings) -> Result<f64> {
    mean_over_known(p, |q| Ok(average_precision(&positive_ranks(p, r, q)?)))
}

/// mINP: positives / rank of the last positive, averaged over known queries.
pub fn mean_inp(p: &RetrievalProblem, r: &Rankings) -> Result<f64> {
    mean_over_known(p, |q| {
        let ranks = positive_ranks(p, r, q)?;
        Ok(ranks.len() as f64 / *ranks.last().expect("non-empty") as f64)
    })
}

/// Fraction of known queries with a positive in the first `k` results.
pub fn top_k_accuracy(p: &RetrievalProblem, r: &Rankings, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Invalid("top-k needs k >= 1".into()));
    }
    mean_over_known(p, |q| {
        let hit = r.order(q).iter().take(k).any(|&g| p.relevant(q, g));
        Ok(if hit { 1.0 } else { 0.0 })
    })
}

/// Top-1 accuracy per known identity, averaged uniformly over identities.
pub fn baks(p: &RetrievalProblem, r: &Rankings) -> Result<f64> {
    let mut per_identity: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for q in p.known_queries() {
        let entry = per_identity.entry(p.query_ids[q].as_str()).or_default();
        entry.1 += 1;
        if r.order(q).first().is_some_and(|&g| p.relevant(q, g)) {
            entry.0 += 1;
        }
    }
    if per_identity.is_empty() {
        return Err(Error::NotApplicable("no known queries"));
    }
    let accs: Vec<f64> = per_identity
        .values()
        .map(|&(hit, total)| hit as f64 / total as f64)
        .collect();
    Ok(pairwise_sum(&accs) / accs.len() as f64)
}

/// Area under the ROC curve separating known from unknown queries by their
/// best gallery similarity (Mann-Whitney statistic, ties count one half).
pub fn open_set_auc(p: &RetrievalProblem, r: &Rankings) -> Result<f64> {
    let known: Vec<f64> = (0..p.num_queries())
        .filter(|&q| p.known[q])
        .map(|q| r.top_score(q))
        .collect();
    let unknown: Vec<f64> = (0..p.num_queries())
        .filter(|&q| !p.known[q])
        .map(|q| r.top_score(q))
        .collect();
    auc_from_scores(&known, &unknown)
}

/// `P(positive > negative) + ½ P(equal)` via midranks.
pub fn auc_from_scores(positive: &[f64], negative: &[f64]) -> Result<f64> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::NotApplicable("needs both known and unknown queries"));
    }
    let mut all: Vec<(f64, bool)> = positive
        .iter()
        .map(|&s| (s, true))
        .chain(negative.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average.
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += midrank * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (positive.len() as f64, negative.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Fixed-key metric summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub map: f64,
    pub minp: f64,
    pub baks: f64,
    /// `None` when the split has no unknown queries (or no known ones).
    pub auc_roc: Option<f64>,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
    pub top10: f64,
}

pub fn evaluate(p: &RetrievalProblem, r: &Rankings) -> Result<MetricReport> {
    let auc_roc = match open_set_auc(p, r) {
        Ok(v) => Some(v),
        Err(Error::NotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        map: mean_average_precision(p, r)?,
        minp: mean_inp(p, r)?,
        baks: baks(p, r)?,
        auc_roc,
        top1: top_k_accuracy(p, r, 1)?,
        top3: top_k_accuracy(p, r, 3)?,
        top5: top_k_accuracy(p, r, 5)?,
        top10: top_k_accuracy(p, r, 10)?,
    })
}

/// Adjusted Rand index between two labelings of the same samples.
/// Returns 1 when both labelings are trivially identical (zero denominator).
pub fn adjusted_rand_index<A, B>(pred: &[A], truth: &[B]) -> Result<f64>
where
    A: std::hash::Hash + Eq,
    B: std::hash::Hash + Eq,
{
    if pred.len() != truth.len() {
        return Err(Error::Invalid(format!(
            "{} predicted labels vs {} true labels",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len();
    let mut table: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (a, b) in pred.iter().zip(truth) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&x| c2(x)).sum();
    let sum_rows: f64 = rows.values().map(|&x| c2(x)).sum();
    let sum_cols: f64 = cols.values().map(|&x| c2(x)).sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
