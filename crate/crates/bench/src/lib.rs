//! Experiment harness for the srcpsp workbench: configuration, the run
//! matrix, the results CSV, reports and the `srcpsp` command line.

pub mod cli;
pub mod config;
pub mod report;
pub mod results;
pub mod runner;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{BenchConfig, InstanceFile};
pub use report::{feasibility_grid, feasibility_ratio, stats_report};
pub use results::{read_results, write_results, ResultRow};
pub use runner::{run_bench, sample_seed, BenchOutput, Exclusion};

/// Environment variable holding the default number of worker threads.
pub const THREADS_ENV: &str = "SRCPSP_THREADS";

#[derive(Debug, Error)]
pub enum BenchError {
    /// Bad flags or arguments.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Other(String),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        BenchError::Data {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// 1 for usage errors, 2 for everything about the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 1,
            _ => 2,
        }
    }
}
