mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Outcome};
use config::Experiment;
use output::Metadata;

#[derive(Parser, Debug)]
#[command(name = "fogform", version, about = "Online fog network formation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Paired framework and baseline replications for one scenario.
    Run(Args),
    /// Every configured sweep family.
    Sweep(Args),
    /// Selection and formation probability curves.
    Analyze(Args),
    /// Latency of identical-neighbor networks by size.
    OfflineSweep(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// TOML config; defaults apply to every omitted key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set channel.fading=0.6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (name, args, command): (&'static str, Args, fn(&Experiment) -> Result<Outcome, CliError>) = match cli.command {
        Command::Run(a) => ("run", a, commands::run),
        Command::Sweep(a) => ("sweep", a, commands::sweep),
        Command::Analyze(a) => ("analyze", a, commands::analyze),
        Command::OfflineSweep(a) => ("offline-sweep", a, commands::offline_sweep),
    };
    let exp = Experiment::load(args.config.as_deref(), &args.overrides, args.seed)?;
    let outcome = command(&exp)?;
    std::fs::create_dir_all(&args.out).map_err(csv::Error::from)?;
    let meta = Metadata { command: name, config_hash: exp.file.hash(), seed: exp.file.seed };
    for table in &outcome.tables {
        let path = table.write(&args.out, &meta)?;
        eprintln!("wrote {}", path.display());
    }
    if outcome.capped > 0 {
        return Err(CliError::IterationCap(format!(
            "{} replications hit the iteration cap of {}",
            outcome.capped, exp.scenario.max_iterations
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
