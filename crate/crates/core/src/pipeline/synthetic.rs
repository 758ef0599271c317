use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::EmbeddingSet;
use crate::{Error, Result};

/// Isotropic Gaussian blobs, one per identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_identities: usize,
    pub samples_per_identity: usize,
    pub dim: usize,
    pub within_spread: f64,
    pub between_spread: f64,
    pub rng_seed: u64,
}

/// Identity centers are drawn from `N(0, between_spread²)` per coordinate and
/// samples from `N(center, within_spread²)`. Sample `i` belongs to identity
/// `i mod num_identities`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<EmbeddingSet> {
    if spec.num_identities == 0 || spec.samples_per_identity == 0 || spec.dim == 0 {
        return Err(Error::Invalid("synthetic counts and dim must be positive".into()));
    }
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(spec.within_spread) || !positive(spec.between_spread) {
        return Err(Error::Invalid("synthetic spreads must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let between = Normal::new(0.0, spec.between_spread).expect("positive spread");
    let within = Normal::new(0.0, spec.within_spread).expect("positive spread");
    let centers: Vec<Vec<f64>> = (0..spec.num_identities)
        .map(|_| (0..spec.dim).map(|_| between.sample(&mut rng)).collect())
        .collect();
    let n = spec.num_identities * spec.samples_per_identity;
    let mut vectors = Vec::with_capacity(n * spec.dim);
    let mut identities = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % spec.num_identities;
        vectors.extend(
            centers[k]
                .iter()
                .map(|&c| (c + within.sample(&mut rng)) as f32),
        );
        identities.push(format!("id{k:04}"));
    }
    let ids = (0..n).map(|i| format!("s{i:05}")).collect();
    EmbeddingSet::new(ids, spec.dim, vectors)?.with_identities(identities)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            num_identities: 3,
            samples_per_identity: 4,
            dim: 5,
            within_spread: 0.1,
            between_spread: 1.0,
            rng_seed: 11,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&spec()).unwrap();
        let b = generate_synthetic(&spec()).unwrap();
        assert_eq!(a.as_flat(), b.as_flat());
        let c = generate_synthetic(&SyntheticSpec { rng_seed: 12, ..spec() }).unwrap();
        assert_ne!(a.as_flat(), c.as_flat());
    }

    #[test]
    fn two_singletons() {
        let e = generate_synthetic(&SyntheticSpec {
            num_identities: 2,
            samples_per_identity: 1,
            ..spec()
        })
        .unwrap();
        assert_eq!(e.len(), 2);
        let ids = e.identities().unwrap();
        assert_ne!(ids[0], ids[1]);
    }

    #[test]
    fn rejects_non_positive_spread() {
        assert!(generate_synthetic(&SyntheticSpec { within_spread: 0.0, ..spec() }).is_err());
    }
}
