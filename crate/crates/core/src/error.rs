use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    DivergedTraining { iteration: usize, loss: f64 },

    #[error("forecast diverged at step {step}: |x| = {value} exceeds bound {bound}")]
    DivergedForecast { step: usize, value: f64, bound: f64 },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
