use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse model: {0}")]
    ModelParse(#[from] serde_json::Error),

    /// A structural violation, reported with the offending field path,
    /// e.g. `mlp.layers[1].weights`.
    #[error("invalid model at `{path}`: {msg}")]
    InvalidModel { path: String, msg: String },

    #[error("invalid dataset (line {line}): {msg}")]
    InvalidDataset { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid netlist: {0}")]
    InvalidNetlist(String),

    #[error("simulation input mismatch: {0}")]
    Stimulus(String),

    #[error("command `{command}` does not accept a {kind} model")]
    KindMismatch { command: String, kind: String },

    #[error("oracle equivalence failed: {mismatches} of {rows} rows differ")]
    Equivalence { rows: usize, mismatches: usize },
}

impl Error {
    pub(crate) fn invalid_model(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidModel {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
