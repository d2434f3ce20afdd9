use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index ({row}, {col}) outside a {rows}x{cols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("window of size {k} centered at ({row}, {col}) does not fit a {rows}x{cols} map")]
    WindowOutOfBounds {
        row: usize,
        col: usize,
        k: usize,
        rows: usize,
        cols: usize,
    },

    #[error("cannot place {requested} non-overlapping windows, only {placed} fit")]
    Infeasible { requested: usize, placed: usize },

    #[error("sequence too short: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("zero variance in samples")]
    ZeroVariance,

    #[error("no eligible layers for profile")]
    NoEligibleLayers,

    #[error("non-positive denominator in ratio for layer {layer}")]
    NonPositiveDenominator { layer: String },

    #[error("missing distance-class factor for squared distance {0}")]
    MissingClassFactor(usize),

    #[error("format tag mismatch: expected \"{expected}\", found \"{found}\"")]
    FormatTag { expected: String, found: String },

    #[error("layer {layer}: shape {shape:?} needs {expected} weights, found {found}")]
    WeightCount {
        layer: String,
        shape: [usize; 4],
        expected: usize,
        found: usize,
    },

    #[error("layer {layer}: non-finite weight at position {index}")]
    NonFinite { layer: String, index: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { loss: f64, step: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input data rather than bad
    /// parameters.
    pub fn is_input_format(&self) -> bool {
        matches!(
            self,
            Error::FormatTag { .. }
                | Error::WeightCount { .. }
                | Error::NonFinite { .. }
                | Error::Parse(_)
                | Error::Shape(_)
                | Error::Io { .. }
        )
    }
}
