use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Similarity used for medoid neighbors and pair weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    Cosine,
    KReciprocalJaccard,
}

/// Which clustering view NP3 refines into the output pseudo-labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseView {
    Dbscan,
    Finch,
}

/// Node-to-label distance used by the NP3 assignment step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Average,
}

/// Mass given to each region within a pair type of the under-segmentation pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMass {
    /// Proportional to the region's share of pairs of that type.
    PairCount,
    Uniform,
}

/// Mass given to each pair within one (type, region) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMass {
    Similarity,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Prior weight of the over-segmentation pool in the pair mixture.
    pub epsilon: f64,
    /// Neighboring medoids considered per medoid.
    pub k_max: usize,
    /// Minimum medoid-pair similarity.
    pub s_min: f64,
    pub budget_fraction_per_cycle: f64,
    pub num_cycles: usize,
    /// Radius on Jaccard distance.
    pub dbscan_eps: f64,
    pub dbscan_min_samples: usize,
    pub knn_k: usize,
    pub finch_level: usize,
    pub rng_seed: u64,
    pub similarity_mode: SimilarityMode,
    /// Prior over (inlier-inlier, inlier-outlier, outlier-outlier) pairs.
    pub type_prior: [f64; 3],
    pub region_mass: RegionMass,
    pub pair_mass: PairMass,
    pub base_view: BaseView,
    pub linkage: Linkage,
    /// Above this many samples the similarity matrix is computed on demand.
    pub dense_threshold: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.6,
            k_max: 5,
            s_min: 0.3,
            budget_fraction_per_cycle: 0.0002,
            num_cycles: 5,
            dbscan_eps: 0.6,
            dbscan_min_samples: 4,
            knn_k: 30,
            finch_level: 0,
            rng_seed: 0,
            similarity_mode: SimilarityMode::KReciprocalJaccard,
            type_prior: [1.0, 1.0, 1.0],
            region_mass: RegionMass::PairCount,
            pair_mass: PairMass::Similarity,
            base_view: BaseView::Dbscan,
            linkage: Linkage::Single,
            dense_threshold: 20_000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must be in [0, 1], got {}", self.epsilon));
        }
        if self.k_max == 0 {
            return bad("k_max must be positive".into());
        }
        if !(-1.0..=1.0).contains(&self.s_min) {
            return bad(format!("s_min must be in [-1, 1], got {}", self.s_min));
        }
        if !(self.budget_fraction_per_cycle > 0.0 && self.budget_fraction_per_cycle < 1.0) {
            return bad(format!(
                "budget_fraction_per_cycle must be in (0, 1), got {}",
                self.budget_fraction_per_cycle
            ));
        }
        if self.num_cycles == 0 {
            return bad("num_cycles must be positive".into());
        }
        if !(self.dbscan_eps.is_finite() && self.dbscan_eps > 0.0) {
            return bad(format!("dbscan_eps must be positive, got {}", self.dbscan_eps));
        }
        if self.dbscan_min_samples == 0 {
            return bad("dbscan_min_samples must be positive".into());
        }
        if self.knn_k == 0 {
            return bad("knn_k must be positive".into());
        }
        if self.type_prior.iter().any(|b| !(b.is_finite() && *b >= 0.0))
            || self.type_prior.iter().sum::<f64>() <= 0.0
        {
            return bad("type_prior entries must be non-negative with positive sum".into());
        }
        Ok(())
    }
}
