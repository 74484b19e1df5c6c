//! Grounding the small-intestine segment of a capsule-endoscopy video.
//!
//! A swallowed capsule camera records ten-plus hours of gastrointestinal
//! video; the clinically interesting part is where the small intestine
//! starts and ends. This crate treats that as a search problem over a
//! per-frame three-way classifier (esophagus/stomach, small intestine,
//! colorectum) and provides:
//!
//! - [`search`] — a fault-tolerant logarithmic boundary search that locates
//!   both boundaries in O(log T) classifier probes, plus the exhaustive
//!   scan baseline;
//! - [`fusion`] — inference for a transformer encoder that fuses the
//!   features of neighboring frames into per-frame confidences;
//! - [`sim`] — synthetic video layouts and classifier oracles (perfect,
//!   confusion-matrix-noisy, file-backed, fusion-backed);
//! - [`eval`] — segment IoU, micro/macro accuracy, confusion estimation,
//!   and boundary-deviation statistics;
//! - [`experiment`] — a seeded Monte-Carlo harness tying the above together.
//!
//! The engine is classifier-agnostic: anything implementing
//! [`FrameClassifier`] can drive the search.

pub mod error;
pub mod eval;
pub mod experiment;
pub mod fusion;
pub mod search;
pub mod sim;
pub mod types;

mod util;

pub use error::{Error, Result};
pub use search::{
    ground_small_intestine, scan_baseline, search_end, search_start, Boundary, Grounding,
    ProbeRecord, ScanOutcome, SearchConfig, SearchTrace,
};
pub use types::{ConfidenceVector, FrameClassifier, FrameIndex, GiClass, Segment};
