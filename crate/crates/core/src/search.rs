//! Fault-tolerant boundary search over a frame classifier.
//!
//! Locating where the small intestine starts and ends in a multi-hour video
//! would normally mean classifying every frame. Both boundaries can instead
//! be found in O(log T) probes: start in the middle, step toward the target
//! boundary by an interval-scaled stride, and shrink the interval by a decay
//! factor `alpha` after every probe. With `alpha > 0.5` the travel budget
//! remaining after any probe exceeds the displacement a single wrong answer
//! can cause, so occasional misclassifications are absorbed instead of being
//! fatal; the config enforces that bound.
//!
//! Strides are confidence-weighted: a probe whose winning class barely
//! clears the threshold `theta` moves the position by little more than the
//! minimum factor `epsilon`, so an unsure classifier drifts instead of
//! lurching.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{FrameClassifier, FrameIndex, GiClass, Segment};
use crate::util::round_half_away;

/// Which boundary of the small-intestine segment a search is after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    Start,
    End,
}

/// Parameters of the boundary search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    alpha: f64,
    theta: f64,
    epsilon: f64,
    initial_fraction: f64,
    stride_alpha: bool,
}

impl Default for SearchConfig {
    /// Decay 0.9, threshold 0.5, minimum stride factor 0.01, starting in
    /// the middle, with the plain stride rule.
    fn default() -> Self {
        SearchConfig {
            alpha: 0.9,
            theta: 0.5,
            epsilon: 0.01,
            initial_fraction: 0.5,
            stride_alpha: false,
        }
    }
}

impl SearchConfig {
    pub fn new(alpha: f64, theta: f64, epsilon: f64) -> Result<Self> {
        let cfg = SearchConfig {
            alpha,
            theta,
            epsilon,
            ..SearchConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_initial_fraction(mut self, initial_fraction: f64) -> Result<Self> {
        self.initial_fraction = initial_fraction;
        self.validate()?;
        Ok(self)
    }

    /// Fold the decay factor into the stride as well, so each step covers
    /// `alpha * d * (max(p - theta, 0) + epsilon)` frames instead of
    /// `d * (...)`. Off by default.
    pub fn with_stride_alpha(mut self, stride_alpha: bool) -> Self {
        self.stride_alpha = stride_alpha;
        self
    }

    /// Build without any of the guards, including `alpha > 0.5`.
    ///
    /// Exists so experiments can demonstrate what happens below the
    /// fault-tolerance threshold; not meant for production searches.
    pub fn unchecked(
        alpha: f64,
        theta: f64,
        epsilon: f64,
        initial_fraction: f64,
        stride_alpha: bool,
    ) -> Self {
        SearchConfig {
            alpha,
            theta,
            epsilon,
            initial_fraction,
            stride_alpha,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidSearchConfig { reason });
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0.5, 1), got {}", self.alpha));
        }
        if !(self.theta >= 0.0 && self.theta < 1.0) {
            return fail(format!("theta must lie in [0, 1), got {}", self.theta));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.initial_fraction > 0.0 && self.initial_fraction < 1.0) {
            return fail(format!(
                "initial_fraction must lie in (0, 1), got {}",
                self.initial_fraction
            ));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn initial_fraction(&self) -> f64 {
        self.initial_fraction
    }

    pub fn stride_alpha(&self) -> bool {
        self.stride_alpha
    }
}

/// One probe of the classifier during a search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub iteration: usize,
    /// Frame probed, already clamped into `[1, T]`.
    pub position: usize,
    /// Search interval `d` at this iteration.
    pub interval: usize,
    pub predicted: GiClass,
    /// Confidence of the predicted class.
    pub confidence: f64,
    /// Signed update applied to the position, before edge clamping.
    pub stride: i64,
}

/// Complete log of one boundary search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrace {
    pub boundary: Boundary,
    pub probes: Vec<ProbeRecord>,
    pub result: FrameIndex,
    pub oracle_calls: usize,
}

/// Decay the search interval. Round-to-nearest has fixed points at small
/// intervals (`round(0.9 * 4) = 4`), so the result is forced strictly below
/// the previous value; the loop terminates once it reaches zero.
fn decay_interval(alpha: f64, d: usize) -> usize {
    let next = (alpha * d as f64).round().max(0.0) as usize;
    if next >= d {
        d - 1
    } else {
        next
    }
}

/// Probing right of the boundary keeps the position moving right exactly
/// while the reported class lies on the near side of that boundary.
fn steps_right(boundary: Boundary, class: GiClass) -> bool {
    match boundary {
        Boundary::End => class != GiClass::Colorectum,
        Boundary::Start => class == GiClass::EsophagusStomach,
    }
}

fn run_search<C>(
    classifier: &C,
    frames: usize,
    cfg: &SearchConfig,
    boundary: Boundary,
) -> Result<(FrameIndex, SearchTrace)>
where
    C: FrameClassifier + ?Sized,
{
    if frames < 2 {
        return Err(Error::VideoTooShort { frames });
    }
    let clamp = |t: i64| t.clamp(1, frames as i64) as usize;
    let mut position = clamp(round_half_away(cfg.initial_fraction * frames as f64));
    let mut interval = round_half_away(0.5 * frames as f64) as usize;
    let mut probes: Vec<ProbeRecord> = Vec::new();
    loop {
        let frame = FrameIndex::new(position).expect("positions are clamped into [1, T]");
        let confidences = match classifier.classify(frame, frames) {
            Ok(p) => p,
            Err(source) => {
                let oracle_calls = probes.len();
                let partial = SearchTrace {
                    boundary,
                    probes,
                    result: frame,
                    oracle_calls,
                };
                return Err(Error::ClassifierFailure {
                    frame: position,
                    source: Box::new(source),
                    partial: Box::new(partial),
                });
            }
        };
        let predicted = confidences.argmax();
        let confidence = confidences.get(predicted);
        let factor = (confidence - cfg.theta).max(0.0) + cfg.epsilon;
        let stride = if cfg.stride_alpha {
            cfg.alpha * interval as f64 * factor
        } else {
            interval as f64 * factor
        };
        let target = if steps_right(boundary, predicted) {
            position as f64 + stride
        } else {
            position as f64 - stride
        };
        let next = round_half_away(target);
        probes.push(ProbeRecord {
            iteration: probes.len(),
            position,
            interval,
            predicted,
            confidence,
            stride: next - position as i64,
        });
        position = clamp(next);
        interval = decay_interval(cfg.alpha, interval);
        if interval < 1 {
            break;
        }
    }
    let result = FrameIndex::new(position).expect("positions are clamped into [1, T]");
    let oracle_calls = probes.len();
    let trace = SearchTrace {
        boundary,
        probes,
        result,
        oracle_calls,
    };
    Ok((result, trace))
}

/// Locate the last small-intestine frame.
///
/// Steps right while the probe reads esophagus/stomach or small intestine,
/// left when it reads colorectum, until the interval decays below one frame.
pub fn search_end<C>(
    classifier: &C,
    frames: usize,
    cfg: &SearchConfig,
) -> Result<(FrameIndex, SearchTrace)>
where
    C: FrameClassifier + ?Sized,
{
    run_search(classifier, frames, cfg, Boundary::End)
}

/// Locate the first small-intestine frame: the mirrored search, stepping
/// right only while probes read esophagus/stomach.
pub fn search_start<C>(
    classifier: &C,
    frames: usize,
    cfg: &SearchConfig,
) -> Result<(FrameIndex, SearchTrace)>
where
    C: FrameClassifier + ?Sized,
{
    run_search(classifier, frames, cfg, Boundary::Start)
}

/// Result of locating both boundaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grounding {
    pub segment: Segment,
    /// Set when the two searches crossed (repaired by swapping) or collapsed
    /// onto a single frame; triage the run instead of trusting the segment.
    pub degenerate: bool,
    pub start_trace: SearchTrace,
    pub end_trace: SearchTrace,
}

impl Grounding {
    pub fn oracle_calls(&self) -> usize {
        self.start_trace.oracle_calls + self.end_trace.oracle_calls
    }
}

/// Run both boundary searches and assemble the small-intestine segment.
pub fn ground_small_intestine<C>(
    classifier: &C,
    frames: usize,
    cfg: &SearchConfig,
) -> Result<Grounding>
where
    C: FrameClassifier + ?Sized,
{
    let (start, start_trace) = search_start(classifier, frames, cfg)?;
    let (end, end_trace) = search_end(classifier, frames, cfg)?;
    let degenerate = start >= end;
    let (lo, hi) = if start <= end { (start, end) } else { (end, start) };
    let segment = Segment::new(lo, hi).expect("bounds are ordered");
    Ok(Grounding {
        segment,
        degenerate,
        start_trace,
        end_trace,
    })
}

/// Exhaustive baseline outcome. `segment` is `None` when no frame
/// classifies as small intestine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOutcome {
    pub segment: Option<Segment>,
    pub oracle_calls: usize,
}

/// Classify every frame and take the first and last whose winning class is
/// small intestine. Costs exactly `frames` oracle calls.
pub fn scan_baseline<C>(classifier: &C, frames: usize) -> Result<ScanOutcome>
where
    C: FrameClassifier + ?Sized,
{
    if frames < 2 {
        return Err(Error::VideoTooShort { frames });
    }
    let mut first = None;
    let mut last = None;
    for t in 1..=frames {
        let frame = FrameIndex::new(t).expect("t >= 1");
        let p = classifier.classify(frame, frames)?;
        if p.argmax() == GiClass::SmallIntestine {
            first.get_or_insert(t);
            last = Some(t);
        }
    }
    let segment = match (first, last) {
        (Some(lo), Some(hi)) => Some(Segment::from_bounds(lo, hi)?),
        _ => None,
    };
    Ok(ScanOutcome {
        segment,
        oracle_calls: frames,
    })
}
