//! Distances, exact nearest neighbors and the k-reciprocal Jaccard similarity.

use crate::model::{EmbeddingSet, SimilarityMode};
use crate::{par, Error, Result};

/// `1 - u·v / (|u||v|)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Invalid(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 {
        return Err(Error::ZeroVector(0));
    }
    if nv == 0.0 {
        return Err(Error::ZeroVector(1));
    }
    Ok((1.0 - dot(u, v) / (nu * nv)).clamp(0.0, 2.0))
}

#[inline]
pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Anything that can report a symmetric distance between two samples.
pub trait PairwiseDistance: Sync {
    fn len(&self) -> usize;
    fn distance(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Cosine,
    Euclidean,
}

/// Distances computed from feature rows. For cosine the rows are
/// pre-normalized, so `d(i, j) = 1 - <x_i, x_j>`.
#[derive(Debug, Clone)]
pub struct FeatureDistance {
    rows: Vec<Vec<f64>>,
    metric: Metric,
}

impl FeatureDistance {
    pub fn new(e: &EmbeddingSet, metric: Metric) -> Result<Self> {
        let rows = match metric {
            Metric::Cosine => e.unit_rows()?,
            Metric::Euclidean => (0..e.len())
                .map(|i| e.row(i).iter().map(|&x| f64::from(x)).collect())
                .collect(),
        };
        Ok(Self { rows, metric })
    }

    pub fn cosine(e: &EmbeddingSet) -> Result<Self> {
        Self::new(e, Metric::Cosine)
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

impl PairwiseDistance for FeatureDistance {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (u, v) = (&self.rows[i], &self.rows[j]);
        match self.metric {
            Metric::Cosine => (1.0 - dot(u, v)).clamp(0.0, 2.0),
            Metric::Euclidean => u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Per-sample nearest neighbors, ascending by distance, ties by index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    k: usize,
    lists: Vec<Vec<(usize, f64)>>,
}

impl NeighborList {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.lists[i]
    }

    pub fn indices(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.lists[i].iter().map(|&(j, _)| j)
    }
}

/// Exact k nearest neighbors, self excluded.
pub fn knn<D: PairwiseDistance + ?Sized>(dist: &D, k: usize) -> Result<NeighborList> {
    let n = dist.len();
    if k == 0 || k >= n {
        return Err(Error::Invalid(format!("knn needs 0 < k < n, got k={k}, n={n}")));
    }
    let lists = par::map_range(n, |i| {
        let mut row: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, dist.distance(i, j)))
            .collect();
        let by_dist = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        row.select_nth_unstable_by(k - 1, by_dist);
        row.truncate(k);
        row.sort_unstable_by(by_dist);
        row
    });
    Ok(NeighborList { k, lists })
}

/// `R(u) = {v : v ∈ kNN(u), u ∈ kNN(v)} ∪ {u}`, each sorted ascending.
pub fn reciprocal_sets(neighbors: &NeighborList) -> Vec<Vec<usize>> {
    let n = neighbors.len();
    let membership: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut m: Vec<usize> = neighbors.indices(i).collect();
            m.sort_unstable();
            m
        })
        .collect();
    (0..n)
        .map(|u| {
            let mut r: Vec<usize> = membership[u]
                .iter()
                .copied()
                .filter(|&v| membership[v].binary_search(&u).is_ok())
                .collect();
            r.push(u);
            r.sort_unstable();
            r
        })
        .collect()
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(Vec<f64>),
    ReciprocalSets(Vec<Vec<usize>>),
    UnitRows(Vec<Vec<f64>>),
}

/// Symmetric pairwise similarity. Jaccard mode lies in `[0, 1]`, cosine mode
/// in `[-1, 1]`; the diagonal is 1 either way. Small sets are materialized,
/// large ones answer from the reciprocal sets or unit rows on demand.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    n: usize,
    mode: SimilarityMode,
    storage: Storage,
}

impl SimilarityMatrix {
    /// Wraps a precomputed row-major matrix after checking symmetry and the
    /// diagonal.
    pub fn from_dense(n: usize, values: Vec<f64>, mode: SimilarityMode) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Invalid(format!("{} values for {n}x{n}", values.len())));
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::Invalid(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let v = values[i * n + j];
                if !v.is_finite() || v != values[j * n + i] {
                    return Err(Error::Invalid(format!("entry ({i}, {j}) breaks symmetry")));
                }
            }
        }
        Ok(Self {
            n,
            mode,
            storage: Storage::Dense(values),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mode(&self) -> SimilarityMode {
        self.mode
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        match &self.storage {
            Storage::Dense(v) => v[i * self.n + j],
            Storage::ReciprocalSets(sets) => jaccard(&sets[i], &sets[j]),
            Storage::UnitRows(rows) => dot(&rows[i], &rows[j]).clamp(-1.0, 1.0),
        }
    }

    /// Distance view: `1 - sim` in both modes.
    pub fn as_distance(&self) -> SimilarityDistance<'_> {
        SimilarityDistance(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimilarityDistance<'a>(&'a SimilarityMatrix);

impl PairwiseDistance for SimilarityDistance<'_> {
    fn len(&self) -> usize {
        self.0.n
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        1.0 - self.0.get(i, j)
    }
}

/// Jaccard similarity of k-reciprocal neighbor sets under cosine distance.
pub fn k_reciprocal_similarity(
    e: &EmbeddingSet,
    k: usize,
    dense_threshold: usize,
) -> Result<SimilarityMatrix> {
    let dist = FeatureDistance::cosine(e)?;
    let neighbors = knn(&dist, k)?;
    Ok(reciprocal_similarity_from(&neighbors, dense_threshold))
}

pub fn reciprocal_similarity_from(neighbors: &NeighborList, dense_threshold: usize) -> SimilarityMatrix {
    let n = neighbors.len();
    let sets = reciprocal_sets(neighbors);
    if n > dense_threshold {
        return SimilarityMatrix {
            n,
            mode: SimilarityMode::KReciprocalJaccard,
            storage: Storage::ReciprocalSets(sets),
        };
    }
    // Inverted index: which sets contain each sample.
    let mut postings = vec![Vec::new(); n];
    for (u, set) in sets.iter().enumerate() {
        for &w in set {
            postings[w].push(u);
        }
    }
    let rows = par::map_range(n, |u| {
        let mut shared = vec![0usize; n];
        for &w in &sets[u] {
            for &v in &postings[w] {
                shared[v] += 1;
            }
        }
        (0..n)
            .map(|v| {
                if v == u {
                    1.0
                } else {
                    let inter = shared[v];
                    inter as f64 / (sets[u].len() + sets[v].len() - inter) as f64
                }
            })
            .collect::<Vec<f64>>()
    });
    SimilarityMatrix {
        n,
        mode: SimilarityMode::KReciprocalJaccard,
        storage: Storage::Dense(rows.concat()),
    }
}

/// Plain cosine similarity.
pub fn cosine_similarity(e: &EmbeddingSet, dense_threshold: usize) -> Result<SimilarityMatrix> {
    let rows = e.unit_rows()?;
    let n = rows.len();
    if n > dense_threshold {
        return Ok(SimilarityMatrix {
            n,
            mode: SimilarityMode::Cosine,
            storage: Storage::UnitRows(rows),
        });
    }
    let values = par::map_range(n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    1.0
                } else {
                    dot(&rows[i], &rows[j]).clamp(-1.0, 1.0)
                }
            })
            .collect::<Vec<f64>>()
    });
    Ok(SimilarityMatrix {
        n,
        mode: SimilarityMode::Cosine,
        storage: Storage::Dense(values.concat()),
    })
}

/// Similarity in the requested mode.
pub fn similarity(
    e: &EmbeddingSet,
    mode: SimilarityMode,
    knn_k: usize,
    dense_threshold: usize,
) -> Result<SimilarityMatrix> {
    match mode {
        SimilarityMode::Cosine => cosine_similarity(e, dense_threshold),
        SimilarityMode::KReciprocalJaccard => {
            let k = knn_k.min(e.len().saturating_sub(1)).max(1);
            k_reciprocal_similarity(e, k, dense_threshold)
        }
    }
}
