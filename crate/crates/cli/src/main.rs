use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use partialcrit_cli::{execute, Command, Invocation};

/// Alternating minimization/maximization solver for partial critical points
/// of coupled variational systems.
#[derive(Debug, Parser)]
#[command(name = "partialcrit", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Test the hypotheses of the configured problem.
    Check(Args),
    /// Run the alternating scheme.
    Solve(Args),
    /// Run the scheme and cross-check it against the Newton oracle.
    Compare(Args),
    /// Convergence certificates and dominance checks for matrices.
    Lemma(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// Run config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the scheme and the samplers; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Run the scheme even when the monotony matrix is not convergent to zero.
    #[arg(long)]
    override_hypotheses: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version are not errors
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Lemma(a) => (Command::Lemma, a),
    };
    let inv = Invocation {
        command,
        config: args.config,
        out: args.out,
        seed: args.seed,
        override_hypotheses: args.override_hypotheses,
    };
    ExitCode::from(execute(&inv) as u8)
}
