use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    Convergence { iterations: usize, last_update: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("style error: {0}")]
    Style(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("training diverged at epoch {epoch}: loss {loss:e} > 10x initial {initial:e}")]
    Divergence { epoch: usize, loss: f64, initial: f64 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("strike {strike}: {source}")]
    AtStrike {
        strike: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Solver, pivot or training breakdowns as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. } | Error::Convergence { .. } | Error::Divergence { .. } => true,
            Error::AtStrike { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
