//! Std companion to `calm-core`: experiment configs, file formats, the
//! experiment runner and the TCP serving layer.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

pub mod config;
pub mod experiment;
pub mod formats;
pub mod wire;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] calm_core::Error),
    #[error("network: {0}")]
    Net(#[from] std::io::Error),
    #[error("protocol: {0}")]
    Protocol(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
