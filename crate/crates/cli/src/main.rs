//! `lagrograph`: batch front end for generation, solving, rotation,
//! verification and analysis of Lagrangian gradient graphs.
//!
//! Exit codes: 0 success, 1 non-convergence or failed verification,
//! 2 validation error, 3 I/O error.

mod args;
mod commands;
mod manifest;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use lagrograph::Error;

use args::{Cli, Command, SolveCommand};
use manifest::{Outputs, RunManifest, MANIFEST_FILE};

pub const EXIT_NONCONVERGENCE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// A fatal error with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::LinearSolver(_) | Error::InversionFailure { .. } => EXIT_NONCONVERGENCE,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("LAGROGRAPH_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::validation(format!("LAGROGRAPH_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::validation(format!("cannot configure {threads} threads: {e}")))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate(_) => "generate",
        Command::Solve {
            equation: SolveCommand::Sl(_),
        } => "solve sl",
        Command::Solve {
            equation: SolveCommand::Hs(_),
        } => "solve hs",
        Command::Rotate(_) => "rotate",
        Command::Verify(_) => "verify",
        Command::Analyze(_) => "analyze",
        Command::Budget(_) => "budget",
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let timestamp_unix = manifest::source_date_epoch()?;
    let config = commands::solver_config(&cli.common)?;
    let mut out = Outputs::create(&cli.common.out)?;
    let common = &cli.common;
    let outcome = match &cli.command {
        Command::Generate(a) => commands::generate(common, a, &mut out)?,
        Command::Solve {
            equation: SolveCommand::Sl(a),
        } => commands::solve_sl(common, a, &mut out)?,
        Command::Solve {
            equation: SolveCommand::Hs(a),
        } => commands::solve_hs(common, a, &mut out)?,
        Command::Rotate(a) => commands::rotate(common, a, &mut out)?,
        Command::Verify(a) => commands::verify(common, a, &mut out)?,
        Command::Analyze(a) => commands::analyze(common, a, &mut out)?,
        Command::Budget(a) => commands::budget(common, a, &mut out)?,
    };
    let input_paths = outcome
        .inputs
        .iter()
        .map(|p| manifest::record(p, &p.to_string_lossy()))
        .collect::<Result<_, _>>()?;
    let run_manifest = RunManifest {
        tool: "lagrograph",
        version: env!("CARGO_PKG_VERSION"),
        command: command_name(&cli.command).to_owned(),
        arguments: std::env::args().skip(1).collect(),
        input_paths,
        output_dir: cli.common.out.to_string_lossy().into_owned(),
        config,
        seed: cli.common.seed,
        grid: outcome.grid.as_ref().map(Into::into),
        timestamp_unix,
        exit_code: outcome.exit_code,
        artifacts: out.records()?,
    };
    let path = out.write_json(MANIFEST_FILE, &run_manifest)?;
    println!("manifest: {}", path.display());
    Ok(u8::try_from(outcome.exit_code).unwrap_or(EXIT_NONCONVERGENCE))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
