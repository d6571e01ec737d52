use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("observation database is empty")]
    EmptyDatabase,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("node {0} has no rank")]
    MissingRank(u32),

    #[error("brute-force agony limited to {limit} nodes, graph has {nodes}")]
    BruteForceGuard { nodes: usize, limit: usize },

    #[error(
        "level-wise mining refused for {size} traces (limit {limit}); use the sampling algorithm \
         or raise the mining limit"
    )]
    MiningGuard { size: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("generator gave up: {0}")]
    Infeasible(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input files or configuration rather than
    /// by an algorithm failing to find a solution.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Infeasible(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
