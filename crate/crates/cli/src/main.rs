mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use neat_trader::fitness::FitnessOption;
use neat_trader::trainer::StageSchedule;

use failure::Failure;

/// Evolve, select and evaluate NEAT trading networks.
#[derive(Debug, Parser)]
#[command(name = "neat-trader", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for every file the command writes.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 is the reproducible reference mode.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load OHLCV CSV files into the bar store.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Generate synthetic tickers into the bar store.
    Synth(SynthArgs),
    /// Run the generational training loop.
    Train(TrainArgs),
    /// Pick a champion from a saved population.
    Select {
        #[arg(long)]
        population: Option<PathBuf>,
        /// Backtests per individual.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Compare a genome against Buy & Hold on random windows.
    Evaluate {
        #[arg(long)]
        genome: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Backtest a genome on one ticker and date range.
    Backtest {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long)]
        ticker: String,
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
    },
    /// Render plots and summaries from earlier outputs.
    Report {
        /// Training history CSV (default: history.csv in the output dir).
        #[arg(long)]
        history: Option<PathBuf>,
        /// Per-run comparison CSV (default: evaluation_runs.csv in the output dir).
        #[arg(long)]
        runs: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub tickers: usize,
    #[arg(long, default_value_t = 2520)]
    pub bars: usize,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub volatility: Option<f64>,
    /// Relative amplitude of a deterministic price cycle.
    #[arg(long)]
    pub cycle_amplitude: Option<f64>,
    #[arg(long)]
    pub cycle_period: Option<f64>,
    /// Also write the bars as CSV into the output dir.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub fitness: Option<FitnessOption>,
    /// Stages as GENERATIONS:DAYS, e.g. 1500:90,400:150,100:365.
    #[arg(long)]
    pub stages: Option<StageSchedule>,
    #[arg(long)]
    pub population: Option<usize>,
    /// Continue from a checkpoint file.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!("error: {f}");
    ExitCode::from(f.code() as u8)
}
