use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fisher_brl::cli::{run_command, Command};

/// BRL price dynamics for CES Fisher markets. Each command takes one TOML
/// config file.
#[derive(Parser)]
#[command(name = "fisher-brl", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for equilibrium prices and cross-check with tâtonnement.
    Equilibrium(Args),
    /// Run price dynamics and export the trajectory as CSV.
    Simulate(Args),
    /// Estimate Thompson contraction ratios of best response and beliefs.
    Contraction(Args),
    /// Write a seeded random market file.
    Generate(Args),
}

#[derive(clap::Args)]
struct Args {
    config: PathBuf,
    /// Output file (overrides `[output] path`; default stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(short, long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Equilibrium(a) => (Command::Equilibrium, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Contraction(a) => (Command::Contraction, a),
        Cmd::Generate(a) => (Command::Generate, a),
    };
    if args.verbose {
        eprintln!("{} {}", command.name(), args.config.display());
    }
    match run_command(command, &args.config, args.output.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fisher-brl {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
