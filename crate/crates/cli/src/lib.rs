//! Front end of the `arxflow` binary. Each subcommand is a plain function so
//! tests can drive it without spawning a process.

pub mod cluster;
pub mod config;
pub mod inspect;
pub mod prepare;
pub mod run;

use std::path::Path;

pub use cluster::{cmd_cluster, ClusterOptions, Profile};
pub use config::ExperimentConfig;
pub use inspect::cmd_inspect;
pub use prepare::{cmd_prepare, PrepareOptions};
pub use run::{cmd_run, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] arxflow_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}: {1}")]
    Context(String, Box<CliError>),
    #[error("{failed} of {total} rows failed")]
    RowsFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stable identifier used in the `error[Code]: message` line.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Config(_) => "Config",
            CliError::Io { .. } => "Io",
            CliError::Context(_, inner) => inner.code(),
            CliError::RowsFailed { .. } => "RowsFailed",
        }
    }

    /// The single-line form printed on stderr.
    pub fn line(&self) -> String {
        format!("error[{}]: {}", self.code(), flatten(&self.to_string()))
    }

    pub fn line_in(&self, context: &str) -> String {
        format!(
            "error[{}]: {context}: {}",
            self.code(),
            flatten(&self.to_string())
        )
    }
}

fn flatten(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
