use thiserror::Error;

use crate::geometry::RelaxationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty reduction")]
    EmptyReduction,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("non-finite {what} at point {point:?}")]
    NonFinite { what: &'static str, point: Vec<f64> },

    #[error("non-finite score at index {index}, point {point:?}")]
    NonFiniteScore { index: usize, point: Vec<f64> },

    #[error("score singular at origin")]
    ScoreSingular,

    #[error("degenerate nearest neighbor at sample {index}")]
    DegenerateNearestNeighbor { index: usize },

    #[error("degenerate mixture component {component}: covariance not positive definite")]
    DegenerateComponent { component: usize },

    #[error("zero-length edge between {from:?} and {to:?}")]
    ZeroLengthEdge { from: Vec<f64>, to: Vec<f64> },

    #[error("zero-length path")]
    ZeroLengthPath,

    #[error("endpoint mismatch: path runs {path_start:?} -> {path_end:?}, distance was computed for {expected_start:?} -> {expected_end:?}")]
    EndpointMismatch {
        path_start: Vec<f64>,
        path_end: Vec<f64>,
        expected_start: Vec<f64>,
        expected_end: Vec<f64>,
    },

    #[error("disconnected: no path from node {from} to node {to}")]
    Disconnected { from: usize, to: usize },

    #[error("relaxation diverging at sweep {sweep} (max displacement {displacement:e})")]
    RelaxationDiverging { sweep: usize, displacement: f64 },

    #[error("relaxation did not converge: {report:?}")]
    NotConverged { report: RelaxationReport },

    #[error("graph too sparse: {skipped} of {total} pairs disconnected")]
    GraphTooSparse { skipped: usize, total: usize },

    #[error("parse error in {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(what: &'static str, message: impl ToString) -> Self {
        Error::Parse {
            what,
            message: message.to_string(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
