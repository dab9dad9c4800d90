//! Loading experiments and datasets, and the `plan`, `validate`,
//! `simulate` and `report` commands behind the `aeronet` binary.

pub mod commands;
pub mod config;
pub mod dataset;

use aeronet::protocol::TraceError;
use aeronet::sim::SimError;
use aeronet::topology::ConnectivityViolation;
use serde_json::json;
use thiserror::Error;

pub use commands::{run_command, Command, Invocation};
pub use config::{load_experiment, ExperimentConfig, LinkKind, Overrides};
pub use dataset::{load_dataset, DatasetError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{} required links are out of range", .0.len())]
    Connectivity(Vec<ConnectivityViolation>),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Dataset(_) | CliError::Trace(_) => 2,
            CliError::Connectivity(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Dataset(_) => "dataset",
            CliError::Trace(_) => "trace",
            CliError::Connectivity(_) => "connectivity",
            CliError::Runtime(_) => "runtime",
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let details = match self {
            CliError::Config(errors) => json!(errors),
            CliError::Connectivity(v) => json!(v),
            _ => json!([]),
        };
        json!({ "error": self.kind(), "message": self.to_string(), "details": details }).to_string()
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(errors) => CliError::Config(errors),
            SimError::Connectivity(v) => CliError::Connectivity(v),
            SimError::Topology(t) => CliError::Runtime(format!("link failure: {t}")),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
