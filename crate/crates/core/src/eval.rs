//! Metrics: temporal segment IoU, micro/macro classification accuracy,
//! empirical confusion matrices, and boundary-deviation statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::{ConfusionMatrix, VideoLayout};
use crate::types::{FrameClassifier, FrameIndex, GiClass, Segment};

/// Frame-set intersection over union of two segments, endpoints inclusive;
/// 0 when they are disjoint.
pub fn segment_iou(pred: &Segment, truth: &Segment) -> f64 {
    let lo = pred.start().get().max(truth.start().get());
    let hi = pred.end().get().min(truth.end().get());
    let intersection = if lo <= hi { hi - lo + 1 } else { 0 };
    let union = pred.frame_count() + truth.frame_count() - intersection;
    intersection as f64 / union as f64
}

/// Micro- and macro-averaged accuracy from `(total, correct)` counts per
/// class. Micro pools over frames; macro averages the per-class rates and
/// needs every class populated.
pub fn micro_macro_accuracy(per_class: [(usize, usize); 3]) -> Result<(f64, f64)> {
    for (i, &(total, correct)) in per_class.iter().enumerate() {
        if correct > total {
            return Err(Error::InvalidCounts {
                class: i as u8 + 1,
                correct,
                total,
            });
        }
    }
    let total: usize = per_class.iter().map(|&(n, _)| n).sum();
    if total == 0 {
        return Err(Error::EmptySample);
    }
    let mut macro_sum = 0.0;
    for (i, &(n, c)) in per_class.iter().enumerate() {
        if n == 0 {
            return Err(Error::MacroUndefined { class: i as u8 + 1 });
        }
        macro_sum += c as f64 / n as f64;
    }
    let correct: usize = per_class.iter().map(|&(_, c)| c).sum();
    Ok((correct as f64 / total as f64, macro_sum / 3.0))
}

/// Column-normalized empirical confusion matrix from `(predicted, truth)`
/// pairs; errors when some ground-truth class never occurs.
pub fn confusion_estimate(pairs: &[(GiClass, GiClass)]) -> Result<ConfusionMatrix> {
    let mut counts = [[0usize; 3]; 3];
    for &(pred, truth) in pairs {
        counts[pred.index()][truth.index()] += 1;
    }
    ConfusionMatrix::from_counts(counts)
}

/// `(predicted, truth)` pairs from classifying every frame of a layout.
pub fn prediction_pairs<C>(
    classifier: &C,
    layout: &VideoLayout,
) -> Result<Vec<(GiClass, GiClass)>>
where
    C: FrameClassifier + ?Sized,
{
    let frames = layout.frames();
    let mut pairs = Vec::with_capacity(frames);
    for t in 1..=frames {
        let frame = FrameIndex::new(t).expect("t >= 1");
        let predicted = classifier.classify(frame, frames)?.argmax();
        pairs.push((predicted, layout.class_at(frame)));
    }
    Ok(pairs)
}

/// `(total, correct)` per ground-truth class.
pub fn counts_from_pairs(pairs: &[(GiClass, GiClass)]) -> [(usize, usize); 3] {
    let mut counts = [(0usize, 0usize); 3];
    for &(pred, truth) in pairs {
        counts[truth.index()].0 += 1;
        if pred == truth {
            counts[truth.index()].1 += 1;
        }
    }
    counts
}

/// Boxplot-style summary of deviations: quartiles by linear interpolation
/// between order statistics, whiskers at the most extreme data within
/// 1.5 IQR of the quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationSummary {
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub mean: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

/// Linear interpolation between order statistics at `(n - 1) * p`.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn deviation_summary(samples: &[f64]) -> Result<DeviationSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lower_quartile = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let upper_quartile = quantile(&sorted, 0.75);
    let iqr = upper_quartile - lower_quartile;
    let low_fence = lower_quartile - 1.5 * iqr;
    let high_fence = upper_quartile + 1.5 * iqr;
    let whisker_low = sorted
        .iter()
        .copied()
        .find(|&v| v >= low_fence)
        .expect("some datum lies above the lower fence");
    let whisker_high = sorted
        .iter()
        .rev()
        .copied()
        .find(|&v| v <= high_fence)
        .expect("some datum lies below the upper fence");
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(DeviationSummary {
        median,
        lower_quartile,
        upper_quartile,
        mean,
        whisker_low,
        whisker_high,
    })
}

/// A predicted segment scored against the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundingResult {
    pub predicted: Segment,
    pub truth: Segment,
    pub iou: f64,
    pub start_error: usize,
    pub end_error: usize,
    pub oracle_calls: usize,
}

pub fn grounding_result(
    predicted: &Segment,
    truth: &Segment,
    oracle_calls: usize,
) -> GroundingResult {
    GroundingResult {
        predicted: *predicted,
        truth: *truth,
        iou: segment_iou(predicted, truth),
        start_error: predicted.start().get().abs_diff(truth.start().get()),
        end_error: predicted.end().get().abs_diff(truth.end().get()),
        oracle_calls,
    }
}
