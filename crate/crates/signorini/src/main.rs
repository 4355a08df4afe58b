//! Command-line front end: run a configured scenario, list the registry, or
//! drive the acceptance suite.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 acceptance criterion failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use signorini::config::RunConfig;
use signorini::{accept, runner, scenario, Error};

#[derive(Parser)]
#[command(name = "signorini", version, about = "Thin obstacle solves and regularity diagnostics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a configured scenario and write its artifacts.
    Run {
        /// TOML configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the built-in scenarios.
    List,
    /// Run the acceptance criteria and print one line per criterion.
    Accept {
        /// Only run criteria carrying this tag (e.g. frequency, solver).
        #[arg(long)]
        only: Option<String>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CRITERION: u8 = 4;

fn error_code(e: &Error) -> u8 {
    match e {
        Error::SolverStall(_) => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn cmd_run(config: &PathBuf, out: &PathBuf) -> Result<(), Error> {
    let cfg = RunConfig::load(config)?.resolve()?;
    let summary = runner::run_experiment(&cfg, out)?;
    println!(
        "{}: solved in {} sweeps, artifacts in {}",
        cfg.scenario.name,
        summary.solve.sweeps,
        out.display()
    );
    Ok(())
}

fn cmd_list() {
    for sc in scenario::all() {
        println!("{:<12} n={}  m={:<4} {}", sc.name, sc.dim, sc.default_m, sc.summary);
    }
}

fn cmd_accept(only: Option<&str>) -> Result<bool, Error> {
    let outcomes = accept::run_tagged(only)?;
    let mut all = true;
    for o in &outcomes {
        println!("{}", accept::format_line(o));
        all &= o.pass;
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!(
        "{} of {} criteria passed{}",
        outcomes.len() - failed,
        outcomes.len(),
        if let Some(tag) = only { format!(" (tag '{tag}')") } else { String::new() }
    );
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, out } => match cmd_run(&config, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(error_code(&e))
            }
        },
        Cmd::List => {
            cmd_list();
            ExitCode::SUCCESS
        }
        Cmd::Accept { only } => match cmd_accept(only.as_deref()) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(EXIT_CRITERION),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(error_code(&e))
            }
        },
    }
}
