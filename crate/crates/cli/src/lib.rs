//! Batch front-end: reads a TOML run configuration and writes plot-ready CSVs.
//!
//! ```text
//! fwdsmile <price|smile|converge|limits|compare> <CONFIG> [--seed N] [--out DIR] [--strict] [--threads N]
//! ```
//!
//! Every CSV starts with `# fwdsmile <version> command=<cmd> config_hash=<hex> seed=<n>`,
//! and the resolved configuration is written next to the tables as
//! `<prefix>_<cmd>_config.toml`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Command, Report};
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fwdsmile", version, about = "Forward-start pricing and forward smile studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArg,
}

#[derive(Debug, Subcommand)]
pub enum CommandArg {
    /// Direct and decomposition prices over the alpha grid.
    Price(RunArgs),
    /// Forward implied volatilities over the alpha grid.
    Smile(RunArgs),
    /// ATM level, skew and curvature along the gap list, with extrapolation.
    Converge(RunArgs),
    /// Short-maturity limits and the curvature term breakdown.
    Limits(RunArgs),
    /// Extrapolated smile quantities against their limits.
    Compare(RunArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// TOML run configuration.
    pub config: PathBuf,
    /// Override `mc.seed`.
    #[arg(long, env = "FWDSMILE_SEED")]
    pub seed: Option<u64>,
    /// Override `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 3 when a comparison row fails.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "FWDSMILE_THREADS")]
    pub threads: Option<usize>,
    /// Write a binary summary of the simulated paths (price and smile only).
    #[arg(long)]
    pub dump_paths: Option<PathBuf>,
}

impl CommandArg {
    pub fn split(self) -> (Command, RunArgs) {
        match self {
            CommandArg::Price(a) => (Command::Price, a),
            CommandArg::Smile(a) => (Command::Smile, a),
            CommandArg::Converge(a) => (Command::Converge, a),
            CommandArg::Limits(a) => (Command::Limits, a),
            CommandArg::Compare(a) => (Command::Compare, a),
        }
    }
}

/// Result of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: Report,
}

/// Loads, overrides and resolves the configuration for one run.
pub fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(error::io_err(&args.config))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    cfg.resolve()
}

/// Runs one subcommand and writes its CSVs and the resolved configuration.
pub fn run_command(command: Command, args: &RunArgs) -> Result<Outcome, CliError> {
    let cfg = load_config(args)?;
    let work = || commands::execute(command, &cfg, args.dump_paths.as_deref());
    let report = match args.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let banner = output::banner(command.name(), cfg.hash(), cfg.mc.seed);
    let dir = &cfg.output.dir;
    let prefix = &cfg.output.prefix;
    let mut files = Vec::new();
    for table in &report.tables {
        let name = format!("{prefix}_{}.csv", table.name);
        files.push(output::write_file(dir, &name, &table.render(&banner))?);
    }
    let echo = format!("{banner}\n{}", cfg.to_toml());
    files.push(output::write_file(dir, &format!("{prefix}_{}_config.toml", command.name()), &echo)?);

    if args.strict && report.failed_rows > 0 {
        return Err(CliError::ComparisonFailed { failed: report.failed_rows });
    }
    Ok(Outcome { files, report })
}

/// Parses arguments and runs; returns the process exit code. Errors are
/// reported on stderr as a single JSON record.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (command, args) = cli.command.split();
    match run_command(command, &args) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.record(Some(command.name())));
            e.exit_code()
        }
    }
}
