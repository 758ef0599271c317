use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use aas_core::evaluation::{evaluate, rank_gallery, RetrievalProblem};
use aas_core::io;
use aas_core::model::Linkage;
use aas_core::np3;
use aas_core::pipeline::{
    generate_synthetic, run_loop, CyclePlan, RefreshHook, RunDir, SimulatedOracle, Strategy,
    SyntheticSpec, Views,
};
use aas_core::sampler::encode_queries;
use aas_core::ambiguity::encode_pool_audit;
use aas_core::{ConstraintStore, EmbeddingSet, MethodTag};
use anyhow::{Context, Result};
use clap::{Args, ValueEnum};

use crate::config::{serde_value, ConfigArgs};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub identities: usize,
    #[arg(long, default_value_t = 10)]
    pub per_identity: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.8)]
    pub within: f64,
    #[arg(long, default_value_t = 1.0)]
    pub between: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Binary embeddings file; the manifest goes next to it as `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let e = generate_synthetic(&SyntheticSpec {
        num_identities: a.identities,
        samples_per_identity: a.per_identity,
        dim: a.dim,
        within_spread: a.within,
        between_spread: a.between,
        rng_seed: a.seed,
    })?;
    io::write_embeddings(&a.out, &e)?;
    eprintln!("wrote {} x {} embeddings to {}", e.len(), e.dim(), a.out.display());
    Ok(())
}

fn load(path: &Path) -> Result<EmbeddingSet> {
    io::read_embeddings(path).with_context(|| format!("reading embeddings {}", path.display()))
}

fn load_store(path: Option<&Path>, e: &EmbeddingSet) -> Result<ConstraintStore> {
    let mut store = ConstraintStore::new(e.len());
    if let Some(path) = path {
        for c in io::read_constraints(path, e)? {
            store.add(c)?;
        }
    }
    Ok(store)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Dbscan,
    Finch,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "dbscan")]
    pub method: Method,
    /// Partition CSV (`id,cluster,outlier`).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn cluster(a: &ClusterArgs) -> Result<()> {
    let config = a.config.resolve()?;
    let e = load(&a.embeddings)?;
    let views = Views::compute(&e, &config)?;
    let p = match a.method {
        Method::Dbscan => &views.dbscan,
        Method::Finch => &views.finch,
    };
    io::write_partition(&a.out, p, &e)?;
    eprintln!("{} clusters over {} samples", p.num_clusters(), p.len());
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Aas,
    Uniform,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Aas => Strategy::Aas,
            StrategyArg::Uniform => Strategy::UniformRandom,
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Answers gathered so far (JSON Lines).
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Cycle number stamped on the queries; also selects the draw seed.
    #[arg(long, default_value_t = 0)]
    pub cycle: usize,
    #[arg(long, value_enum, default_value = "aas")]
    pub strategy: StrategyArg,
    /// Query file (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional audit of the whole candidate pool.
    #[arg(long)]
    pub pool_out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    let config = a.config.resolve()?;
    let e = load(&a.embeddings)?;
    let store = load_store(a.constraints.as_deref(), &e)?;
    let mut plan = CyclePlan::prepare(&e, &store, &config, a.strategy.into(), a.cycle)?;
    let budget = plan.budget;
    let queries: Vec<_> = std::iter::from_fn(|| plan.next_query())
        .take(budget)
        .collect();
    io::write_atomic(&a.out, &encode_queries(&queries, &e))?;
    if let Some(path) = &a.pool_out {
        io::write_atomic(path, &encode_pool_audit(plan.pool_audit(), &e))?;
    }
    eprintln!(
        "{} regions, pools {} + {}, {} of {} budgeted queries drawn",
        plan.regions.len(),
        plan.pool_os,
        plan.pool_us,
        queries.len(),
        plan.budget
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Partition CSV to refine.
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub constraints: PathBuf,
    /// `single` or `average`.
    #[arg(long, value_parser = serde_value::<Linkage>, default_value = "single")]
    pub linkage: Linkage,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn refine(a: &RefineArgs) -> Result<()> {
    let e = load(&a.embeddings)?;
    let part = io::read_partition(&a.partition, &e, MethodTag::A)?;
    let store = load_store(Some(&a.constraints), &e)?;
    let refined = np3::refine_with_embeddings(&part, &store, &e, a.linkage)?;
    io::write_partition(&a.out, &refined, &e)?;
    eprintln!(
        "{} -> {} clusters under {} constraints",
        part.num_clusters(),
        refined.num_clusters(),
        store.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    /// Metrics JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let g = load(&a.gallery)?;
    let q = load(&a.query)?;
    let problem = RetrievalProblem::new(&g, &q)?;
    let report = evaluate(&problem, &rank_gallery(&g, &q)?)?;
    match &a.out {
        Some(path) => io::write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RefreshMode {
    Static,
    Synthetic,
    External,
}

#[derive(Debug, Args)]
pub struct RefreshArgs {
    /// What happens to the embeddings between cycles.
    #[arg(long, value_enum, default_value = "static")]
    pub refresh: RefreshMode,
    /// Where partitions and constraints are handed to the trainer
    /// (external mode; defaults to the run directory).
    #[arg(long)]
    pub refresh_dir: Option<PathBuf>,
    /// Embeddings file the trainer writes back (external mode).
    #[arg(long)]
    pub replacement: Option<PathBuf>,
    #[arg(long, default_value_t = 3600)]
    pub refresh_timeout_secs: u64,
    #[arg(long, default_value_t = 500)]
    pub refresh_poll_ms: u64,
}

impl RefreshArgs {
    fn hook(&self, run_dir: &Path) -> Result<RefreshHook> {
        Ok(match self.refresh {
            RefreshMode::Static => RefreshHook::Static,
            RefreshMode::Synthetic => RefreshHook::SyntheticRefresh,
            RefreshMode::External => RefreshHook::External {
                dir: self.refresh_dir.clone().unwrap_or_else(|| run_dir.to_path_buf()),
                replacement: self
                    .replacement
                    .clone()
                    .context("external refresh needs --replacement")?,
                timeout: Duration::from_secs(self.refresh_timeout_secs),
                poll: Duration::from_millis(self.refresh_poll_ms),
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    /// Embeddings with ground-truth identities (answers are simulated).
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "aas")]
    pub strategy: StrategyArg,
    #[command(flatten)]
    pub refresh: RefreshArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(a: &LoopArgs) -> Result<()> {
    let config = a.config.resolve()?;
    let e = load(&a.embeddings)?;
    let mut oracle = SimulatedOracle::new(&e)?;
    let hook = a.refresh.hook(&a.out)?;
    let out = run_loop(
        e,
        &config,
        a.strategy.into(),
        &mut oracle,
        &hook,
        Some(&RunDir::new(&a.out)),
    )?;
    let s = &out.state;
    eprintln!(
        "{} cycles, {} of {} budgeted answers ({:.4}% of pairs), {} clusters",
        s.history.len(),
        s.budget_used,
        s.budget_allotted,
        100.0 * s.budget_used as f64 / s.total_pairs().max(1) as f64,
        out.partition.num_clusters()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Static front end served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "aas")]
    pub strategy: StrategyArg,
    #[command(flatten)]
    pub refresh: RefreshArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let config = a.config.resolve()?;
    let e = load(&a.embeddings)?;
    let hook = a.refresh.hook(&a.out)?;
    let session = aas_service::Session::start(
        e,
        config,
        a.strategy.into(),
        hook,
        RunDir::new(&a.out),
    )?;
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("serving on http://{}", a.addr);
    rt.block_on(aas_service::serve(a.addr, session, a.ui_dir.clone()))?;
    Ok(())
}
