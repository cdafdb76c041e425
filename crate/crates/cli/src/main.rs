//! `passnet`: simulate, ingest, fit and evaluate the latent-factor passing model.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use passnet_core::sampler::ModelKind;

#[derive(Parser, Debug)]
#[command(name = "passnet", version, about = "Continuous-time latent-factor passing model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset from the model prior.
    Simulate(SimulateArgs),
    /// Turn tracking, play-by-play and box-score files into a dataset.
    Ingest(IngestArgs),
    /// Run the sampler on the training split of a dataset.
    Fit(FitArgs),
    /// Log-likelihood of a split under fitted samples.
    Evaluate(EvaluateArgs),
    /// Fit both models and tabulate their log-likelihoods.
    Compare(CompareArgs),
    /// Posterior-mean sender and receiver factors of one game.
    ExportFactors(ExportArgs),
    /// Sender and receiver spatial fields of one player.
    Spatial(SpatialArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    games: u32,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(5..))]
    players: u32,
    /// Total intervals across games.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u32).range(1..))]
    obs: u32,
    /// Latent dimension.
    #[arg(long = "R", default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    rank: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interval length in seconds.
    #[arg(long, default_value_t = 0.2)]
    dt: f64,
    #[arg(long)]
    out: PathBuf,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// `.xml` files are read as XML, anything else as comma-separated lines.
    #[arg(long)]
    tracking: PathBuf,
    #[arg(long)]
    playbyplay: PathBuf,
    #[arg(long)]
    boxscore: PathBuf,
    /// Use flat spatial fields instead of fitting them from the passes.
    #[arg(long)]
    uniform_fields: bool,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    frames_per_interval: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModelArg {
    Latent,
    Covariates,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Latent => ModelKind::Latent,
            ModelArg::Covariates => ModelKind::Covariates,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ChainArgs {
    #[arg(long = "R", default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    rank: u32,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long, default_value_t = 1000)]
    burnin: usize,
    #[arg(long, default_value_t = 4)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of each game's intervals used for training.
    #[arg(long, default_value_t = 0.9)]
    split_fraction: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Directory holding covariates.tsv and events.tsv.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Latent)]
    model: ModelArg,
    #[command(flatten)]
    chain: ChainArgs,
    /// Independent chains with seeds seed, seed+1, ..., run concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    chains: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    #[arg(long, default_value_t = 0.9)]
    split_fraction: f64,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    game: u32,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpatialArgs {
    /// Output directory of `ingest`.
    #[arg(long)]
    ingest: PathBuf,
    /// Raw player id as it appears in the input files.
    #[arg(long)]
    player: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PASSNET_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Fit(a) => commands::fit(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Compare(a) => commands::compare(a),
        Command::ExportFactors(a) => commands::export_factors(a),
        Command::Spatial(a) => commands::spatial(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
