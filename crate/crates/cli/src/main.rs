//! Command-line interface for the repeated-auction toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error,
//! 4 verification failed (`verify` in CI gates).

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::analytic::{AnalyticArgs, AnalyticQuery};
use commands::verify::VerifyArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

const ALL_FORMATS: [OutputFormat; 3] = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg];

#[derive(Parser)]
#[command(
    name = "auctionlab",
    version,
    about = "Simulate repeated auctions among regret-minimizing agents and verify the equilibria they reach"
)]
struct Cli {
    /// Worker threads for sweeps (default: AUCTIONLAB_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one repeated auction and write logs, summary, and figures.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output families to emit (default: all).
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<OutputFormat>>,
    },
    /// Sweep declared-value cells and write the payoff surface.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<OutputFormat>>,
    },
    /// Check CCE and co-undominated conditions for a distribution or run.
    Verify {
        /// Joint distribution CSV (needs --rule and --values).
        #[arg(long)]
        dist: Option<PathBuf>,
        /// Completed run directory (reads summary.json and the joint CSV).
        #[arg(long)]
        run: Option<PathBuf>,
        /// FirstPrice | SecondPrice | GeneralizedFirstPrice | GeneralizedSecondPrice
        #[arg(long)]
        rule: Option<String>,
        #[arg(long, value_delimiter = ',')]
        ctrs: Option<Vec<f64>>,
        /// Player values, e.g. --values 1.0,0.5
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// CCE tolerance on the deviation gain.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 1e-6)]
        support_tol: f64,
        /// Mean-based audit threshold for run inputs (default T^(-1/4)).
        #[arg(long)]
        audit_gamma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print closed-form reference results.
    Analytic {
        #[arg(value_enum)]
        query: AnalyticQuery,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        max_declaration: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<OutputFormat>>,
    },
}

fn thread_count(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("AUCTIONLAB_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or_else(num_threads)
}

fn num_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = thread_count(cli.threads);
    if rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .is_err()
    {
        // The global pool can only be set once; fine under test harnesses.
    }

    match dispatch(cli.command, threads) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// An error carrying the process exit code: 2 for configuration problems,
/// 3 for runtime failures.
struct CliError {
    code: u8,
    inner: anyhow::Error,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        self.code
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.inner.fmt(f)
    }
}

trait Stage<T> {
    fn config_stage(self) -> Result<T, CliError>;
    fn runtime_stage(self) -> Result<T, CliError>;
}

impl<T> Stage<T> for anyhow::Result<T> {
    fn config_stage(self) -> Result<T, CliError> {
        self.map_err(|inner| CliError { code: 2, inner })
    }

    fn runtime_stage(self) -> Result<T, CliError> {
        self.map_err(|inner| CliError { code: 3, inner })
    }
}

fn dispatch(command: Command, threads: usize) -> Result<i32, CliError> {
    match command {
        Command::Simulate {
            config,
            out,
            seed,
            format,
        } => {
            let file = config::load(&config).config_stage()?;
            let run_config = config::to_run_config(&file, seed).config_stage()?;
            drop(run_config); // validated eagerly so bad configs never write
            let formats = format.unwrap_or_else(|| ALL_FORMATS.to_vec());
            commands::simulate::execute(&file, &out, seed, &formats, threads).runtime_stage()
        }
        Command::Sweep {
            config,
            out,
            seed,
            format,
        } => {
            let file = config::load(&config).config_stage()?;
            config::to_sweep_config(&file, seed).config_stage()?;
            let formats = format.unwrap_or_else(|| ALL_FORMATS.to_vec());
            commands::sweep::execute(&file, &out, seed, &formats, threads).runtime_stage()
        }
        Command::Verify {
            dist,
            run,
            rule,
            ctrs,
            values,
            delta,
            support_tol,
            audit_gamma,
            out,
        } => {
            let args = VerifyArgs {
                dist: dist.as_deref(),
                run_dir: run.as_deref(),
                rule: rule.as_deref(),
                ctrs,
                values,
                delta,
                support_tol,
                audit_gamma,
                out: out.as_deref(),
            };
            let inputs = commands::verify::load_inputs(&args).config_stage()?;
            commands::verify::execute(args, inputs).runtime_stage()
        }
        Command::Analytic {
            query,
            v,
            w,
            eps,
            max_declaration,
            out,
            format,
        } => commands::analytic::execute(AnalyticArgs {
            query,
            v,
            w,
            eps,
            max_declaration,
            out: out.as_deref(),
            csv: format.map_or(true, |f| f.contains(&OutputFormat::Csv)),
        })
        .config_stage(),
    }
}
