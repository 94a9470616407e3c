use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {op} got {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("lookup out of range: id {id} with capacity {capacity}")]
    Lookup { id: usize, capacity: usize },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ingestion failed: {0}")]
    Ingest(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("finite-difference oracle: {0}")]
    Oracle(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// Data-side failures (ingestion, empty selections) as opposed to
    /// configuration or numerical ones.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Ingest(_) | Error::EmptyDataset(_) | Error::Lookup { .. }
        )
    }

    pub fn is_numeric_error(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::Oracle(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
