//! Pipeline driver for event-relation-graph article classification.
//!
//! Everything observable lives behind the `erg` binary: stages read and
//! write cache artifacts, emit reports, and exit 0 on success, 1 on a
//! configuration problem, and 2 when an upstream artifact is missing or
//! a request is infeasible for the given corpus.

use std::fmt;

pub mod config;
pub mod report;
pub mod stages;

pub use config::{emit_ablation_suite, PipelineConfig};
pub use report::{sha256_file, RunReport};
pub use stages::{Pipeline, PredictionRow, Stage};

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration; exit 1.
    Config(String),
    /// An artifact another stage produces is missing; exit 2.
    Prerequisite(String),
    /// A stage failed while running; exit 1, except infeasible
    /// requests, which exit 2 like other unsatisfiable preconditions.
    Run(erg_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Prerequisite(_) => 2,
            CliError::Run(erg_core::Error::Infeasible(_)) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Prerequisite(msg) => write!(f, "missing prerequisite: {msg}"),
            CliError::Run(err) => write!(f, "{err}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<erg_core::Error> for CliError {
    fn from(err: erg_core::Error) -> CliError {
        CliError::Run(err)
    }
}
