use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("time {t} outside series domain [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("series has zero duration")]
    DegenerateDuration,

    #[error("series too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("iteration did not converge after {iterations} steps")]
    Convergence { iterations: usize },

    #[error("window {window} has {len} samples, need at least {min}")]
    WindowTooSmall { window: usize, len: usize, min: usize },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("unknown name: {0}")]
    Vocabulary(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("warping band of half-width {band} cannot align lengths {len_a} and {len_b}")]
    InfeasibleBand { band: usize, len_a: usize, len_b: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
