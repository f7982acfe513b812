//! Command line front end: `fwcheck coherence` checks the policy for
//! internal conflicts, `fwcheck verify` checks the deployed firewalls
//! against it.
//!
//! Exit codes: 0 coherent/conform, 1 violations found, 2 policy incoherent,
//! 3 input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fwcheck::input::load_job;
use fwcheck::job::{run, Mode};

#[derive(Parser)]
#[command(
    name = "fwcheck",
    version,
    about = "Checks distributed firewall configurations against a declarative security policy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the security policy for internal conflicts
    Coherence(JobArgs),
    /// Check policy coherence, then verify every directive on every path
    Verify(JobArgs),
}

#[derive(Args)]
struct JobArgs {
    /// Policy document (directives and exceptions)
    #[arg(long)]
    policy: PathBuf,
    /// Topology document (zones, firewalls, paths)
    #[arg(long)]
    topology: PathBuf,
    /// Optional priorities document
    #[arg(long)]
    priorities: Option<PathBuf>,
    /// Write the report to this file instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Also run the exhaustive downscaled oracle and check it agrees
    #[arg(long)]
    oracle: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Json,
}

fn execute(mode: Mode, args: &JobArgs) -> ExitCode {
    let job = match load_job(&args.policy, &args.topology, args.priorities.as_deref()) {
        Ok(job) => job,
        Err(err) => {
            eprintln!("input error:");
            for issue in &err.issues {
                eprintln!("  {issue}");
            }
            return ExitCode::from(3);
        }
    };
    let outcome = match run(&job, mode, args.oracle) {
        Ok(outcome) => outcome,
        Err(err) => {
            eprintln!("input error: {err}");
            return ExitCode::from(3);
        }
    };
    let rendered = match args.format {
        Format::Human => outcome.human(),
        Format::Json => outcome.json(),
    };
    match &args.report {
        Some(path) => {
            if let Err(err) = std::fs::write(path, rendered) {
                eprintln!("input error: cannot write report to {}: {err}", path.display());
                return ExitCode::from(3);
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::from(outcome.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Coherence(args) => execute(Mode::CoherenceOnly, args),
        Command::Verify(args) => execute(Mode::Full, args),
    }
}
