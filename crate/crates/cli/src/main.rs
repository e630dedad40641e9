use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fh_cli::commands::{attack, chain, gen, rankeval, report, verify};
use fh_cli::commands::report::ReportArgs;
use fh_cli::{CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "fh",
    about = "Homotopy-continuation benchmark harness for discrete search over compiled formula objectives",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Parallel worker count (results are identical for any width).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Base-seed override.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::load(&self.config)?
            .with_overrides(self.seed_override, self.out.clone())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances (DIMACS + compiled JSON).
    Gen(ConfigArgs),
    /// Build and save one checkpoint chain per instance.
    Chain(ConfigArgs),
    /// Run the configured benchmark arms and write rows + summary.
    Attack(ConfigArgs),
    /// Run the three-ranking protocol and write rows + summary.
    Rankeval(ConfigArgs),
    /// Merge attack row files into success tables and histograms.
    Report {
        /// Attack rows.csv files to merge.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory for report files.
        #[arg(long)]
        out: PathBuf,
        /// Histogram bin width in iterations.
        #[arg(long, default_value_t = 50)]
        bin_width: usize,
        /// Budget cuts for the success table.
        #[arg(long, value_delimiter = ',', default_values_t = vec![500, 1000])]
        cuts: Vec<usize>,
    },
    /// Recompute aggregates from rows and re-check chain invariants.
    Verify {
        /// Run directory to verify.
        #[arg(long)]
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Gen(args) => gen::run(&args.load()?),
        Command::Chain(args) => chain::run(&args.load()?, args.workers),
        Command::Attack(args) => attack::run(&args.load()?, args.workers),
        Command::Rankeval(args) => rankeval::run(&args.load()?, args.workers),
        Command::Report { inputs, out, bin_width, cuts } => {
            report::run(&ReportArgs { inputs, out, bin_width, cuts })
        }
        Command::Verify { dir } => verify::run(&dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
