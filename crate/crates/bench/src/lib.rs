//! Config-driven experiments comparing the mixed tensor oracle with a plain
//! fast gradient method on the joint problem, plus rate studies of the inner
//! tensor methods. Every cell writes a CSV trace; summaries aggregate the
//! final rows over repetitions.

pub mod config;
pub mod run;
pub mod summary;
pub mod trace;

use std::fmt;
use std::path::Path;

pub use config::{ExperimentConfig, Method};
pub use run::{run_experiment, RunOptions, RunReport};
pub use summary::{summarize, Summary};

#[derive(Debug, Clone, PartialEq)]
pub enum BenchError {
    /// Malformed or inconsistent input; `line` is 1-based when known.
    Config {
        line: Option<usize>,
        message: String,
    },
    Io(String),
}

impl BenchError {
    /// Prefixes a configuration error with the file it came from.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            BenchError::Config { line, message } => BenchError::Config {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config { .. } => 2,
            BenchError::Io(_) => 1,
        }
    }
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::Config { line: Some(l), message } => write!(f, "config error at line {l}: {message}"),
            BenchError::Config { line: None, message } => write!(f, "config error: {message}"),
            BenchError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for BenchError {}
