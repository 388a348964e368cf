//! `ctmdp`: command-line front end for the average-reward CTMDP solver.

mod args;
mod commands;
mod input;
mod report;
mod runner;

use std::process::ExitCode;

use clap::Parser;
use ctmdp_core::Error;

/// Why a command stopped. Input problems exit 2; numeric failures exit 1
/// with an error report on stdout.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn input(message: String) -> Self {
        Failure { code: 2, kind: "input", message }
    }

    pub fn from_core(e: Error) -> Self {
        let kind = match &e {
            Error::MaxIterations { .. } => "max_iterations",
            Error::SingularSystem(_) => "singular_system",
            Error::ExplosionSuspected { .. } => "explosion_suspected",
            _ => return Failure::input(e.to_string()),
        };
        Failure { code: 1, kind, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors.
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let name = cli.command.name();
    match commands::run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("ctmdp {name}: {}", f.message);
            if f.code == 1 {
                let v = serde_json::json!({
                    "format_version": report::FORMAT_VERSION,
                    "command": name,
                    "error": { "kind": f.kind, "message": f.message },
                });
                let _ = report::emit(&v, None);
            }
            ExitCode::from(f.code)
        }
    }
}
