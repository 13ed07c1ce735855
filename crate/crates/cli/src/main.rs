use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod config;
mod manifest;
mod svg;

use commands::Failure;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "nlab", version, about = "Peak functions and non-interpolation witnesses for dyadic counterexample sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sequence CSV and a figure of the points above one dyadic interval.
    Construct(Common),
    /// Blaschke sum, Carleson norm and separation of a sequence.
    Check(Common),
    /// Build every peak function, audit the delta property and tabulate gauges.
    Peaks(Common),
    /// Nevanlinna LP depth trace or the Smirnov kernel-sum contradiction.
    Witness(Common),
    /// Render figures only.
    Figure(Common),
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = set_threads() {
        eprintln!("error: {f}");
        return ExitCode::from(f.code());
    }
    let (run, common): (fn(&RunConfig, &std::path::Path) -> Result<(), Failure>, &Common) = match &cli.command {
        Command::Construct(c) => (commands::construct, c),
        Command::Check(c) => (commands::check, c),
        Command::Peaks(c) => (commands::peaks, c),
        Command::Witness(c) => (commands::witness, c),
        Command::Figure(c) => (commands::figure, c),
    };
    let cfg = match RunConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg, &common.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn set_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("NLAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Config(format!("NLAB_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    Ok(())
}
