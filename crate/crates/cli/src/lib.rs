//! Experiment driver: TOML configs in, CSV tables, graymaps and JSON
//! manifests out.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
mod output;
pub mod run;

pub use config::{Axis, ExperimentConfig, ModelKind};
pub use run::{run, Command, Overrides, RunSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Observable(#[from] aquid_core::ObservableError),
    #[error(transparent)]
    Hamiltonian(#[from] aquid_core::HamiltonianError),
    #[error(transparent)]
    Basis(#[from] aquid_core::BasisError),
    #[error(transparent)]
    Effective(#[from] aquid_core::EffectiveError),
    #[error(transparent)]
    Beam(aquid_core::beam::BeamError),
    #[error("feedback did not reach {threshold_percent}% (best {best_percent:.4}%); outputs written")]
    NotConverged { best_percent: f64, threshold_percent: f64 },
    #[error("at {axis} = {value}: {source}")]
    AtPoint {
        axis: &'static str,
        value: f64,
        #[source]
        source: Box<CliError>,
    },
}

impl From<aquid_core::beam::BeamError> for CliError {
    fn from(e: aquid_core::beam::BeamError) -> Self {
        CliError::Beam(e)
    }
}

impl CliError {
    /// Process exit status: 2 for bad input, 3 for an unconverged feedback
    /// run, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation { .. } => 2,
            CliError::NotConverged { .. } => 3,
            _ => 1,
        }
    }
}
