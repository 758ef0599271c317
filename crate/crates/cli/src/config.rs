use std::path::PathBuf;

use aas_core::model::{BaseView, Linkage, SimilarityMode};
use aas_core::{io, RunConfig};
use anyhow::{Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;

/// Parses a snake_case enum value the same way the JSON config does.
pub fn serde_value<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy)]
pub enum SeedArg {
    Fixed(u64),
    Random,
}

fn parse_seed(s: &str) -> Result<SeedArg, String> {
    if s == "random" {
        return Ok(SeedArg::Random);
    }
    s.parse()
        .map(SeedArg::Fixed)
        .map_err(|_| format!("expected an integer or `random`, got {s:?}"))
}

/// Run configuration: a JSON file, then individual overrides.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON file with run settings; unset fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// RNG seed, or `random` to draw one (it is printed).
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<SeedArg>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub s_min: Option<f64>,
    #[arg(long)]
    pub budget_fraction_per_cycle: Option<f64>,
    #[arg(long)]
    pub num_cycles: Option<usize>,
    #[arg(long)]
    pub dbscan_eps: Option<f64>,
    #[arg(long)]
    pub dbscan_min_samples: Option<usize>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub finch_level: Option<usize>,
    /// `cosine` or `k_reciprocal_jaccard`.
    #[arg(long, value_parser = serde_value::<SimilarityMode>)]
    pub similarity_mode: Option<SimilarityMode>,
    /// `dbscan` or `finch`.
    #[arg(long, value_parser = serde_value::<BaseView>)]
    pub base_view: Option<BaseView>,
    /// `single` or `average`.
    #[arg(long, value_parser = serde_value::<Linkage>)]
    pub linkage: Option<Linkage>,
    #[arg(long)]
    pub dense_threshold: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c: RunConfig = match &self.config {
            Some(path) => io::read_json(path).context("reading config")?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            epsilon,
            k_max,
            s_min,
            budget_fraction_per_cycle,
            num_cycles,
            dbscan_eps,
            dbscan_min_samples,
            knn_k,
            finch_level,
            similarity_mode,
            base_view,
            linkage,
            dense_threshold
        );
        match self.seed {
            Some(SeedArg::Fixed(s)) => c.rng_seed = s,
            Some(SeedArg::Random) => {
                c.rng_seed = rand::random();
                eprintln!("seed: {}", c.rng_seed);
            }
            None => {}
        }
        c.validate()?;
        Ok(c)
    }
}
