mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    ClusterArgs, EvaluateArgs, LoopArgs, RefineArgs, SampleArgs, ServeArgs, SynthArgs,
};

/// Ambiguity-aware pair sampling and constrained refinement for re-ID
/// embeddings.
#[derive(Debug, Parser)]
#[command(name = "aas", version)]
struct Cli {
    /// Worker threads for the data-parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate Gaussian-blob embeddings with identities.
    Synth(SynthArgs),
    /// Cluster embeddings with DBSCAN or FINCH.
    Cluster(ClusterArgs),
    /// Draw one cycle's annotation queries.
    Sample(SampleArgs),
    /// Enforce must-link / cannot-link constraints on a partition.
    Refine(RefineArgs),
    /// Retrieval metrics for a gallery/query split.
    Evaluate(EvaluateArgs),
    /// Full active-learning loop against simulated answers.
    Loop(LoopArgs),
    /// Serve an annotation session over HTTP.
    Serve(ServeArgs),
}

const EXIT_INVALID: u8 = 1;
const EXIT_CONTRADICTION: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    }
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Sample(a) => commands::sample(a),
        Command::Refine(a) => commands::refine(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Loop(a) => commands::run(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let contradiction = e
                .chain()
                .filter_map(|c| c.downcast_ref::<aas_core::Error>())
                .any(aas_core::Error::is_contradiction);
            ExitCode::from(if contradiction {
                EXIT_CONTRADICTION
            } else {
                EXIT_INVALID
            })
        }
    }
}
