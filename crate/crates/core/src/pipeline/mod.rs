//! Batch front end: ingest household extracts, estimate per country-year
//! cell, test equal exponents, and run the model from a config file.
//!
//! Every numeric field written to disk goes through [`crate::format::sig6`]
//! (six significant digits), so reruns with the same inputs and seeds produce
//! byte-identical files.

pub mod cell;
pub mod config;
pub mod ingest;
pub mod model;
pub mod report;
pub mod synthetic;

use std::fmt;

use thiserror::Error;

pub use cell::{run_cell, run_cells, CellOptions, CellReport, SkipReason};
pub use config::KeyValues;
pub use ingest::{ingest, ingest_reader, CellKey, Ingested, PanelRecord, Schema};
pub use model::{run_model, run_sweep, ModelConfig, ModelRun};
pub use report::{emit_reports, pearson_with_ci, Correlation, Summary};

/// Steps of a model run, named in errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Theory,
    Solver,
    Simulation,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Theory => "exponent_theory",
            Stage::Solver => "ifp_solver",
            Stage::Simulation => "panel_sim",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("{bad} of {total} rows malformed, above the tolerated share {max_fraction}")]
    TooManyBadRows {
        bad: usize,
        total: usize,
        max_fraction: f64,
    },
    #[error("no cell reports to write")]
    NoReports,
    #[error("{0}")]
    Io(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    pub(crate) fn stage(stage: Stage, err: impl fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}
