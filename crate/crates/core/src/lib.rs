//! Ambiguity-aware active learning for re-identification over precomputed
//! embeddings.
//!
//! Two complementary clusterings (DBSCAN and FINCH) are compared to find
//! regions where they disagree. Pairs drawn from inside and across those
//! regions are sent to an oracle, and the resulting must-link / cannot-link
//! answers are enforced on the pseudo-labels by [`np3::refine`].
//!
//! Module map:
//!
//! - [`model`]: embeddings, pairs, partitions, constraints, run configuration
//! - [`io`]: the on-disk formats (binary embeddings, JSON Lines, CSV)
//! - [`geometry`]: cosine distance, exact kNN, k-reciprocal Jaccard similarity
//! - [`clustering`]: DBSCAN and the FINCH hierarchy
//! - [`ambiguity`]: uncertainty regions and the two candidate pools
//! - [`sampler`]: the marginal pair distribution and batch drawing
//! - [`np3`]: constrained refinement (coloring + assignment)
//! - [`evaluation`]: retrieval metrics and ARI
//! - [`pipeline`]: the active-learning loop, oracle, synthetic data, run directory

pub mod ambiguity;
pub mod clustering;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod model;
pub mod np3;
pub mod par;
pub mod pipeline;
pub mod sampler;

mod error;

pub use error::{Error, Result};
pub use model::{
    Constraint, ConstraintSource, ConstraintStore, EmbeddingSet, MethodTag, PairKey, Partition,
    Relation, RunConfig,
};
