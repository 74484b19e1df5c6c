//! Shared domain types: the three-way gastrointestinal class scheme,
//! per-frame confidence vectors, 1-based frame indexing, and the
//! classifier-oracle contract everything else builds on.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance for the "components sum to one" check.
///
/// Loose enough that vectors printed with shortest round-trip formatting
/// revalidate after a file round trip.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Components in `[-NEGATIVE_TOLERANCE, 0)` are treated as rounding debris
/// and clamped to zero; anything more negative is rejected.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Gastrointestinal region of a video frame, in chronological traversal
/// order. The esophagus and stomach are merged into one class, so a capsule
/// passes through the classes in non-decreasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum GiClass {
    EsophagusStomach = 1,
    SmallIntestine = 2,
    Colorectum = 3,
}

impl GiClass {
    /// All classes in traversal order.
    pub const ALL: [GiClass; 3] = [
        GiClass::EsophagusStomach,
        GiClass::SmallIntestine,
        GiClass::Colorectum,
    ];

    /// Zero-based index into confidence vectors and confusion matrices.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    /// One-based class number.
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: usize) -> Option<GiClass> {
        GiClass::ALL.get(index).copied()
    }
}

impl fmt::Display for GiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GiClass::EsophagusStomach => "esophagus/stomach",
            GiClass::SmallIntestine => "small-intestine",
            GiClass::Colorectum => "colorectum",
        })
    }
}

/// Category confidences for one frame: three non-negative components on the
/// probability simplex. Construction validates and renormalizes, so a held
/// value is always a valid distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceVector([f64; 3]);

impl ConfidenceVector {
    /// Validate a raw three-component vector.
    ///
    /// Accepts when every component is at least `-NEGATIVE_TOLERANCE` and
    /// the sum is within `SIMPLEX_TOLERANCE` of one; tiny negatives are
    /// clamped to zero and the result renormalized to sum exactly to one.
    pub fn new(raw: [f64; 3]) -> Result<Self> {
        for (component, &value) in raw.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteConfidence { component });
            }
            if value < -NEGATIVE_TOLERANCE {
                return Err(Error::NegativeConfidence { component, value });
            }
        }
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::ConfidenceSum { sum });
        }
        let mut p = raw.map(|v| v.max(0.0));
        let clamped: f64 = p.iter().sum();
        if clamped != 1.0 {
            for v in &mut p {
                *v /= clamped;
            }
        }
        Ok(ConfidenceVector(p))
    }

    pub fn get(&self, class: GiClass) -> f64 {
        self.0[class.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    /// Most confident class; ties break toward the lower class number so
    /// traces stay reproducible.
    pub fn argmax(&self) -> GiClass {
        let mut best = GiClass::EsophagusStomach;
        for class in [GiClass::SmallIntestine, GiClass::Colorectum] {
            if self.get(class) > self.get(best) {
                best = class;
            }
        }
        best
    }
}

/// One-based position of a frame within a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FrameIndex(usize);

impl FrameIndex {
    pub fn new(t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::ZeroFrameIndex);
        }
        Ok(FrameIndex(t))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for FrameIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Inclusive frame range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    start: FrameIndex,
    end: FrameIndex,
}

impl Segment {
    pub fn new(start: FrameIndex, end: FrameIndex) -> Result<Self> {
        if start > end {
            return Err(Error::InvertedSegment {
                start: start.get(),
                end: end.get(),
            });
        }
        Ok(Segment { start, end })
    }

    pub fn from_bounds(start: usize, end: usize) -> Result<Self> {
        Segment::new(FrameIndex::new(start)?, FrameIndex::new(end)?)
    }

    pub fn start(&self) -> FrameIndex {
        self.start
    }

    pub fn end(&self) -> FrameIndex {
        self.end
    }

    /// Number of frames covered, endpoints inclusive.
    pub fn frame_count(&self) -> usize {
        self.end.get() - self.start.get() + 1
    }

    pub fn contains(&self, t: FrameIndex) -> bool {
        self.start <= t && t <= self.end
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// A frame classifier the search can probe.
///
/// Implementations must be frozen: probing the same frame twice returns the
/// identical vector, bit for bit, no matter the probe order. Classifiers
/// that consume a temporal context window clamp it into
/// `[1, video_length]` themselves, repeating the boundary frame, so callers
/// never trigger out-of-range reads by probing near an edge.
///
/// Probes take `&self`; a classifier that is also `Sync` may serve several
/// searches concurrently, while wrappers with per-call state (the
/// fault-injection oracle) are `!Sync` and stay exclusive to one search.
pub trait FrameClassifier {
    /// Frames of context consumed on each side of the probed position.
    fn context_radius(&self) -> usize {
        0
    }

    /// Category confidences for frame `t` of a `video_length`-frame video.
    fn classify(&self, t: FrameIndex, video_length: usize) -> Result<ConfidenceVector>;
}

impl<C: FrameClassifier + ?Sized> FrameClassifier for &C {
    fn context_radius(&self) -> usize {
        (**self).context_radius()
    }

    fn classify(&self, t: FrameIndex, video_length: usize) -> Result<ConfidenceVector> {
        (**self).classify(t, video_length)
    }
}

impl<C: FrameClassifier + ?Sized> FrameClassifier for Box<C> {
    fn context_radius(&self) -> usize {
        (**self).context_radius()
    }

    fn classify(&self, t: FrameIndex, video_length: usize) -> Result<ConfidenceVector> {
        (**self).classify(t, video_length)
    }
}
