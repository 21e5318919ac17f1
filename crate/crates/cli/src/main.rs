use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use scfa::ScfaError;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "scfa", version, about = "Semi-confirmatory factor analysis on uniform-block covariances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate, test and score one dataset.
    Fit(FitArgs),
    /// Monte Carlo study from a generator config.
    Simulate(SimulateArgs),
    /// Rerun a published simulation table and write its CSVs.
    Reproduce(ReproduceArgs),
    /// Uniform-block matrix utilities.
    Ubmat(UbmatArgs),
}

#[derive(clap::Args, Debug)]
struct FitArgs {
    /// n×p numeric table, one row per observation.
    #[arg(long)]
    data: PathBuf,
    /// `variable,community` records covering every data column.
    #[arg(long)]
    membership: PathBuf,
    /// Subtract column means (covariance divisor n - 1).
    #[arg(long)]
    center: bool,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    /// Table format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// The data file has no header row; columns are named v1..vp.
    #[arg(long)]
    no_header: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Tsv,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    /// Generator config JSON: {n, sizes, a, b, tau?, seed?, noise?}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Table {
    Table1,
    Table2,
    Table3,
}

#[derive(clap::Args, Debug)]
struct ReproduceArgs {
    #[arg(value_enum)]
    table: Table,
    #[arg(long, default_value_t = scfa::simulation::tables::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UbOp {
    /// Sign and log of |det|.
    Det,
    /// Inverse as UB JSON.
    Inv,
    /// All p eigenvalues, ascending.
    Eig,
    /// Dimension, symmetry and positive definiteness.
    Check,
}

#[derive(clap::Args, Debug)]
struct UbmatArgs {
    #[arg(value_enum)]
    op: UbOp,
    /// UB matrix JSON: {sizes, a, b}.
    #[arg(long = "in")]
    input: PathBuf,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1), got {a}"))
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SCFA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("SCFA_THREADS must be a positive integer, got {raw:?}"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn report_error(kind: &str, code: u8, message: &str) -> ExitCode {
    let line = message.replace(['\n', '\r'], " ");
    eprintln!("scfa: error kind={kind} code={code}: {line}");
    ExitCode::from(code)
}

fn exit_code(err: &anyhow::Error) -> (&'static str, u8) {
    match err.chain().find_map(|e| e.downcast_ref::<ScfaError>()) {
        Some(e) if e.is_numerical() => ("numerical", EXIT_NUMERICAL),
        _ => ("input", EXIT_INPUT),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let summary: Vec<&str> = text.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
            let summary = summary.join(" ");
            let summary = summary.strip_prefix("error: ").unwrap_or(&summary);
            return report_error("usage", EXIT_USAGE, summary);
        }
    };
    if let Err(msg) = configure_threads() {
        return report_error("usage", EXIT_USAGE, &msg);
    }
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Reproduce(args) => commands::reproduce(args),
        Command::Ubmat(args) => commands::ubmat(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = exit_code(&e);
            report_error(kind, code, &format!("{e:#}"))
        }
    }
}
