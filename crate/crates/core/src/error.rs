//! One error type for the whole crate.

use thiserror::Error;

use crate::search::SearchTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("confidence component {component} is not finite")]
    NonFiniteConfidence { component: usize },

    #[error("confidence component {component} is {value}, below the negative tolerance")]
    NegativeConfidence { component: usize, value: f64 },

    #[error("confidence components sum to {sum}, outside 1 +/- 1e-6")]
    ConfidenceSum { sum: f64 },

    #[error("frame indices are 1-based; 0 is not a valid frame")]
    ZeroFrameIndex,

    #[error("segment start {start} is after its end {end}")]
    InvertedSegment { start: usize, end: usize },

    #[error("video too short: {frames} frame(s), need at least 2")]
    VideoTooShort { frames: usize },

    #[error("invalid search config: {reason}")]
    InvalidSearchConfig { reason: String },

    /// A classifier failed mid-search; the probes completed so far ride along.
    #[error("classifier failed at frame {frame}: {source}")]
    ClassifierFailure {
        frame: usize,
        source: Box<Error>,
        partial: Box<SearchTrace>,
    },

    #[error("invalid proportions: {reason}")]
    InvalidProportions { reason: String },

    #[error("video of {frames} frame(s) is too small for three non-empty segments")]
    LayoutTooSmall { frames: usize },

    #[error("invalid layout: {reason}")]
    InvalidLayout { reason: String },

    #[error("probe at frame {frame} is outside the video of {frames} frame(s)")]
    ProbeOutOfRange { frame: usize, frames: usize },

    #[error("invalid oracle config: {reason}")]
    InvalidOracleConfig { reason: String },

    #[error("invalid confusion matrix: {reason}")]
    InvalidConfusionMatrix { reason: String },

    #[error("no samples with ground-truth class {class}")]
    EmptyConfusionColumn { class: u8 },

    #[error("class {class} has {correct} correct out of {total} samples")]
    InvalidCounts { class: u8, correct: usize, total: usize },

    #[error("macro accuracy undefined: class {class} has no samples")]
    MacroUndefined { class: u8 },

    #[error("statistics of an empty sample")]
    EmptySample,

    #[error("invalid experiment config: {reason}")]
    InvalidExperiment { reason: String },

    #[error("tensor {tensor}: {reason}")]
    ShapeMismatch { tensor: String, reason: String },

    #[error("{context}:{line}: {reason}")]
    Parse {
        context: String,
        line: usize,
        reason: String,
    },

    #[error("i/o error on {context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}
