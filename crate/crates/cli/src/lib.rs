//! Command-line front end: reads a run config, runs one experiment and
//! writes its artifacts (trace, solution, report, manifest).

pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use thiserror::Error;

pub use artifacts::{Artifacts, FileEntry, RunManifest};
pub use commands::{execute, Command, Invocation};
pub use config::RunConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A hypothesis is falsified (check), the gate refused (solve), or a
    /// dominance check was violated (lemma).
    pub const HYPOTHESIS: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const MAX_OUTER: i32 = 3;
    pub const SOLVER: i32 = 4;
    pub const DISAGREE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] partialcrit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use partialcrit::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => exit::INPUT,
            CliError::Solver(e) => match e {
                E::Input(_) | E::Domain(_) => exit::INPUT,
                E::Hypothesis(_) => exit::HYPOTHESIS,
                _ => exit::SOLVER,
            },
        }
    }
}
