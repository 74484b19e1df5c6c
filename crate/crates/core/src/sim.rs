//! Synthetic videos and classifier oracles for experiments.
//!
//! A [`VideoLayout`] pins the ground-truth small-intestine segment of an
//! abstract video; oracles answer probes against it. The noisy oracle keys
//! every draw by `(seed, frame)`, so re-probing a frame replays the
//! identical prediction no matter the probe order — the determinism the
//! search traces depend on.
//!
//! Misclassifications drawn here are independent across frames. Real
//! classifier errors cluster near region boundaries, so simulated grounding
//! scores track real ones only qualitatively.

use std::cell::Cell;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fusion::{self, FeatureTable, FusionWeights};
use crate::search::Boundary;
use crate::types::{ConfidenceVector, FrameClassifier, FrameIndex, GiClass, Segment};
use crate::util::round_half_away;

/// Ground-truth segment structure of a synthetic video: everything before
/// `start` is esophagus/stomach, everything after `end` is colorectum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VideoLayout {
    frames: usize,
    start: FrameIndex,
    end: FrameIndex,
}

impl VideoLayout {
    pub fn new(frames: usize, start: usize, end: usize) -> Result<Self> {
        if frames == 0 {
            return Err(Error::InvalidLayout {
                reason: "video has no frames".into(),
            });
        }
        let start = FrameIndex::new(start)?;
        let end = FrameIndex::new(end)?;
        if start > end || end.get() > frames {
            return Err(Error::InvalidLayout {
                reason: format!(
                    "boundaries ({start}, {end}) must satisfy 1 <= start <= end <= {frames}"
                ),
            });
        }
        Ok(VideoLayout { frames, start, end })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn start(&self) -> FrameIndex {
        self.start
    }

    pub fn end(&self) -> FrameIndex {
        self.end
    }

    /// The ground-truth small-intestine segment.
    pub fn segment(&self) -> Segment {
        Segment::new(self.start, self.end).expect("start <= end")
    }

    /// Ground-truth class of a frame; non-decreasing in `t`.
    pub fn class_at(&self, t: FrameIndex) -> GiClass {
        if t < self.start {
            GiClass::EsophagusStomach
        } else if t <= self.end {
            GiClass::SmallIntestine
        } else {
            GiClass::Colorectum
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let context = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            context: context.clone(),
            source,
        })?;
        text.trim().parse().map_err(|e: Error| match e {
            Error::InvalidLayout { reason } => Error::Parse {
                context,
                line: 1,
                reason,
            },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, format!("{self}\n")).map_err(|source| Error::Io {
            context: path.display().to_string(),
            source,
        })
    }
}

impl fmt::Display for VideoLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.frames, self.start, self.end)
    }
}

impl FromStr for VideoLayout {
    type Err = Error;

    /// Parses the layout file format: `frames start end`, whitespace
    /// separated.
    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::InvalidLayout {
                reason: format!("expected `frames start end`, got {} field(s)", fields.len()),
            });
        }
        let mut numbers = [0usize; 3];
        for (slot, field) in numbers.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::InvalidLayout {
                reason: format!("{field:?} is not a frame count"),
            })?;
        }
        VideoLayout::new(numbers[0], numbers[1], numbers[2])
    }
}

/// Lay out a synthetic video from three class proportions.
///
/// Boundaries land on the rounded cumulative proportions: with proportions
/// `(p1, p2, p3)` the esophagus/stomach block covers frames
/// `1..=round(p1 * T)` and the small intestine ends at
/// `round((p1 + p2) * T)`. With `jitter > 0` each proportion is first
/// scaled by a seeded factor uniform in `[1 - jitter, 1 + jitter]` and the
/// three renormalized, so Monte-Carlo videos vary; `jitter = 0` is exact
/// and ignores the seed.
pub fn generate_layout(
    frames: usize,
    proportions: [f64; 3],
    jitter: f64,
    seed: u64,
) -> Result<VideoLayout> {
    for (i, &p) in proportions.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidProportions {
                reason: format!("proportion {} must be positive, got {p}", i + 1),
            });
        }
    }
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidProportions {
            reason: format!("proportions sum to {sum}, expected 1"),
        });
    }
    if !(0.0..1.0).contains(&jitter) {
        return Err(Error::InvalidProportions {
            reason: format!("jitter must lie in [0, 1), got {jitter}"),
        });
    }
    let mut props = proportions;
    if jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut props {
            *p *= 1.0 + jitter * rng.random_range(-1.0..1.0);
        }
        let total: f64 = props.iter().sum();
        for p in &mut props {
            *p /= total;
        }
    }
    let first = round_half_away(props[0] * frames as f64);
    let second = round_half_away((props[0] + props[1]) * frames as f64);
    if first < 1 || second <= first || second >= frames as i64 {
        return Err(Error::LayoutTooSmall { frames });
    }
    VideoLayout::new(frames, first as usize + 1, second as usize)
}

/// Column-stochastic class confusion: `get(pred, truth)` is the probability
/// of predicting `pred` on a frame whose ground truth is `truth`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    entries: [[f64; 3]; 3],
}

impl ConfusionMatrix {
    /// Build from prediction rows of raw weights (fractions or percentages).
    ///
    /// Column sums may wobble up to 0.1% relative to their mean, as measured
    /// tables rounded to one decimal do; anything further off is rejected.
    /// Columns are then renormalized to sum exactly to one.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        for row in &rows {
            for &v in row {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidConfusionMatrix {
                        reason: format!("entries must be non-negative and finite, got {v}"),
                    });
                }
            }
        }
        let mut sums = [0.0f64; 3];
        for row in &rows {
            for (sum, &v) in sums.iter_mut().zip(row) {
                *sum += v;
            }
        }
        let mean = (sums[0] + sums[1] + sums[2]) / 3.0;
        for (j, &s) in sums.iter().enumerate() {
            if s <= 0.0 {
                return Err(Error::InvalidConfusionMatrix {
                    reason: format!("ground-truth column {} sums to zero", j + 1),
                });
            }
            if ((s - mean) / mean).abs() > 1e-3 {
                return Err(Error::InvalidConfusionMatrix {
                    reason: format!(
                        "column {} sums to {s}, more than 0.1% away from the mean {mean}",
                        j + 1
                    ),
                });
            }
        }
        let mut entries = rows;
        for row in &mut entries {
            for (v, &sum) in row.iter_mut().zip(&sums) {
                *v /= sum;
            }
        }
        Ok(ConfusionMatrix { entries })
    }

    /// Empirical matrix from raw counts; every ground-truth class must occur.
    pub fn from_counts(counts: [[usize; 3]; 3]) -> Result<Self> {
        let mut sums = [0usize; 3];
        for row in &counts {
            for (sum, &v) in sums.iter_mut().zip(row) {
                *sum += v;
            }
        }
        for (j, &s) in sums.iter().enumerate() {
            if s == 0 {
                return Err(Error::EmptyConfusionColumn { class: j as u8 + 1 });
            }
        }
        let mut entries = [[0.0f64; 3]; 3];
        for (out, row) in entries.iter_mut().zip(&counts) {
            for ((v, &count), &sum) in out.iter_mut().zip(row).zip(&sums) {
                *v = count as f64 / sum as f64;
            }
        }
        Ok(ConfusionMatrix { entries })
    }

    /// Preset measured for a convolutional frame classifier without
    /// temporal fusion.
    pub fn resnet() -> Self {
        ConfusionMatrix::from_rows([[89.4, 4.6, 0.3], [8.8, 92.9, 11.3], [1.9, 2.5, 88.4]])
            .expect("preset is balanced")
    }

    /// Preset measured for the same classifier with transformer feature
    /// fusion over neighboring frames; slightly better on every class.
    pub fn resnet_tfe() -> Self {
        ConfusionMatrix::from_rows([[92.4, 2.5, 0.3], [7.2, 93.1, 7.3], [0.4, 4.4, 92.3]])
            .expect("preset is balanced")
    }

    pub fn get(&self, pred: GiClass, truth: GiClass) -> f64 {
        self.entries[pred.index()][truth.index()]
    }

    /// Prediction distribution for one ground-truth class.
    pub fn column(&self, truth: GiClass) -> [f64; 3] {
        let j = truth.index();
        [self.entries[0][j], self.entries[1][j], self.entries[2][j]]
    }

    pub fn diagonal(&self) -> [f64; 3] {
        [self.entries[0][0], self.entries[1][1], self.entries[2][2]]
    }

    /// Entries as prediction rows.
    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.entries
    }

    pub fn max_abs_difference(&self, other: &ConfusionMatrix) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.entries.iter().zip(&other.entries) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    /// Load a 3x3 table: three data lines of three numbers each (prediction
    /// rows), `#` comments and blank lines skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let context = path.display().to_string();
        let file = File::open(path).map_err(|source| Error::Io {
            context: context.clone(),
            source,
        })?;
        let mut rows = [[0.0f64; 3]; 3];
        let mut filled = 0;
        for (number, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                context: context.clone(),
                source,
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                context: context.clone(),
                line: number + 1,
                reason,
            };
            if filled == 3 {
                return Err(parse_err("more than three matrix rows".into()));
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 entries, got {}",
                    fields.len()
                )));
            }
            for (slot, field) in rows[filled].iter_mut().zip(&fields) {
                *slot = field
                    .parse()
                    .map_err(|_| parse_err(format!("{field:?} is not a number")))?;
            }
            filled += 1;
        }
        if filled != 3 {
            return Err(Error::Parse {
                context,
                line: 0,
                reason: format!("expected 3 matrix rows, found {filled}"),
            });
        }
        ConfusionMatrix::from_rows(rows)
    }
}

/// How the confidence of the winning class is chosen by the noisy oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ConfidenceModel {
    /// The winning class always gets exactly this confidence.
    Fixed(f64),
    /// Beta-distributed spread remapped into `(1/3, 1]`, so the winning
    /// class always keeps the argmax; `mean` is the expected confidence.
    Beta { mean: f64, concentration: f64 },
}

impl ConfidenceModel {
    fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidOracleConfig { reason });
        match *self {
            ConfidenceModel::Fixed(c) => {
                if !(c > 1.0 / 3.0 && c <= 1.0) {
                    return fail(format!("fixed confidence must lie in (1/3, 1], got {c}"));
                }
            }
            ConfidenceModel::Beta {
                mean,
                concentration,
            } => {
                if !(mean > 1.0 / 3.0 && mean < 1.0) {
                    return fail(format!("beta mean must lie in (1/3, 1), got {mean}"));
                }
                if !(concentration > 0.0 && concentration.is_finite()) {
                    return fail(format!("beta concentration must be positive, got {concentration}"));
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ConfidenceModel::Fixed(c) => c,
            ConfidenceModel::Beta {
                mean,
                concentration,
            } => {
                let mu = (mean - 1.0 / 3.0) / (2.0 / 3.0);
                let beta = Beta::new(concentration * mu, concentration * (1.0 - mu))
                    .expect("validated parameters");
                let x: f64 = beta.sample(rng).clamp(1e-12, 1.0);
                1.0 / 3.0 + (2.0 / 3.0) * x
            }
        }
    }
}

/// Configuration of the confusion-matrix noise model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyOracleConfig {
    pub matrix: ConfusionMatrix,
    pub confidence: ConfidenceModel,
    pub seed: u64,
}

/// Vector with `confidence` on `class` and the remainder split equally
/// between the other two classes.
pub(crate) fn peaked_vector(class: GiClass, confidence: f64) -> ConfidenceVector {
    let rest = (1.0 - confidence) / 2.0;
    let mut p = [rest; 3];
    p[class.index()] = confidence;
    ConfidenceVector::new(p).expect("peaked vector is a valid simplex point")
}

/// Oracle that always reports the ground-truth class.
#[derive(Debug, Clone)]
pub struct PerfectOracle {
    layout: VideoLayout,
    confidence: f64,
}

impl PerfectOracle {
    /// `confidence` goes to the true class with the remainder split equally;
    /// it must exceed 1/3 so the argmax stays truthful.
    pub fn new(layout: VideoLayout, confidence: f64) -> Result<Self> {
        if !(confidence > 1.0 / 3.0 && confidence <= 1.0) {
            return Err(Error::InvalidOracleConfig {
                reason: format!("confidence must lie in (1/3, 1], got {confidence}"),
            });
        }
        Ok(PerfectOracle { layout, confidence })
    }
}

impl FrameClassifier for PerfectOracle {
    fn classify(&self, t: FrameIndex, _video_length: usize) -> Result<ConfidenceVector> {
        if t.get() > self.layout.frames() {
            return Err(Error::ProbeOutOfRange {
                frame: t.get(),
                frames: self.layout.frames(),
            });
        }
        Ok(peaked_vector(self.layout.class_at(t), self.confidence))
    }
}

/// Oracle that misclassifies according to a confusion matrix, with draws
/// frozen per frame.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    layout: VideoLayout,
    config: NoisyOracleConfig,
}

impl NoisyOracle {
    pub fn new(layout: VideoLayout, config: NoisyOracleConfig) -> Result<Self> {
        config.confidence.validate()?;
        Ok(NoisyOracle { layout, config })
    }
}

impl FrameClassifier for NoisyOracle {
    fn classify(&self, t: FrameIndex, _video_length: usize) -> Result<ConfidenceVector> {
        if t.get() > self.layout.frames() {
            return Err(Error::ProbeOutOfRange {
                frame: t.get(),
                frames: self.layout.frames(),
            });
        }
        let truth = self.layout.class_at(t);
        // One RNG stream per frame: draws are independent across frames yet
        // identical across probes of the same frame.
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(t.get() as u64);
        let column = self.config.matrix.column(truth);
        let u: f64 = rng.random();
        let predicted = if u < column[0] {
            GiClass::EsophagusStomach
        } else if u < column[0] + column[1] {
            GiClass::SmallIntestine
        } else {
            GiClass::Colorectum
        };
        let confidence = self.config.confidence.sample(&mut rng);
        Ok(peaked_vector(predicted, confidence))
    }
}

/// Oracle serving confidence vectors preloaded from a CSV of
/// `frame,p1,p2,p3` records covering frames `1..=T` contiguously.
#[derive(Debug, Clone)]
pub struct FileOracle {
    vectors: Vec<ConfidenceVector>,
}

impl FileOracle {
    pub fn load(path: &Path) -> Result<Self> {
        let context = path.display().to_string();
        let file = File::open(path).map_err(|source| Error::Io {
            context: context.clone(),
            source,
        })?;
        FileOracle::from_reader(BufReader::new(file), &context)
    }

    pub fn from_reader<R: BufRead>(reader: R, context: &str) -> Result<Self> {
        let mut vectors = Vec::new();
        for (number, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                context: context.to_string(),
                source,
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                context: context.to_string(),
                line: number + 1,
                reason,
            };
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 4 {
                return Err(parse_err(format!(
                    "expected `frame,p1,p2,p3`, got {} field(s)",
                    fields.len()
                )));
            }
            let frame: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("{:?} is not a frame index", fields[0])))?;
            let expected = vectors.len() + 1;
            if frame != expected {
                return Err(parse_err(format!(
                    "expected frame {expected}, found frame {frame}"
                )));
            }
            let mut raw = [0.0f64; 3];
            for (slot, field) in raw.iter_mut().zip(&fields[1..]) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("{field:?} is not a confidence")))?;
            }
            let vector = ConfidenceVector::new(raw)
                .map_err(|e| parse_err(format!("frame {frame}: {e}")))?;
            vectors.push(vector);
        }
        if vectors.is_empty() {
            return Err(Error::Parse {
                context: context.to_string(),
                line: 0,
                reason: "no confidence records".into(),
            });
        }
        Ok(FileOracle { vectors })
    }

    pub fn frames(&self) -> usize {
        self.vectors.len()
    }
}

impl FrameClassifier for FileOracle {
    fn classify(&self, t: FrameIndex, _video_length: usize) -> Result<ConfidenceVector> {
        self.vectors
            .get(t.get() - 1)
            .copied()
            .ok_or(Error::ProbeOutOfRange {
                frame: t.get(),
                frames: self.vectors.len(),
            })
    }
}

/// Write `frame,p1,p2,p3` records for frames `1..=frames` by probing a
/// classifier. Components are printed with shortest round-trip formatting,
/// so the output revalidates under the [`FileOracle`] loader.
pub fn write_confidence_csv<W, C>(writer: &mut W, classifier: &C, frames: usize) -> Result<()>
where
    W: Write,
    C: FrameClassifier + ?Sized,
{
    for t in 1..=frames {
        let p = classifier.classify(FrameIndex::new(t).expect("t >= 1"), frames)?;
        let [a, b, c] = p.as_array();
        writeln!(writer, "{t},{a},{b},{c}").map_err(|source| Error::Io {
            context: "confidence csv writer".into(),
            source,
        })?;
    }
    Ok(())
}

/// Oracle running transformer feature fusion over stored per-frame features.
#[derive(Debug, Clone)]
pub struct FusionOracle {
    features: FeatureTable,
    weights: FusionWeights,
    radius: usize,
}

impl FusionOracle {
    pub fn new(features: FeatureTable, weights: FusionWeights, radius: usize) -> Result<Self> {
        if weights.radius() != radius {
            return Err(Error::InvalidOracleConfig {
                reason: format!(
                    "weights expect a context radius of {}, oracle configured with {radius}",
                    weights.radius()
                ),
            });
        }
        if features.dim() != weights.feature_dim() {
            return Err(Error::InvalidOracleConfig {
                reason: format!(
                    "features have dimension {}, weights expect {}",
                    features.dim(),
                    weights.feature_dim()
                ),
            });
        }
        Ok(FusionOracle {
            features,
            weights,
            radius,
        })
    }

    pub fn load(features: &Path, weights: &Path, radius: usize) -> Result<Self> {
        FusionOracle::new(
            FeatureTable::load(features)?,
            FusionWeights::load(weights)?,
            radius,
        )
    }

    pub fn frames(&self) -> usize {
        self.features.frames()
    }
}

impl FrameClassifier for FusionOracle {
    fn context_radius(&self) -> usize {
        self.radius
    }

    fn classify(&self, t: FrameIndex, video_length: usize) -> Result<ConfidenceVector> {
        let limit = self.features.frames().min(video_length);
        if t.get() > limit {
            return Err(Error::ProbeOutOfRange {
                frame: t.get(),
                frames: limit,
            });
        }
        let window = self.features.window(t.get(), self.radius, limit);
        fusion::fuse_window(&window, &self.weights)
    }
}

/// Wrapper flipping the reported class on exactly one probe.
///
/// Fault-injection harness for the decay-factor threshold: the substituted
/// class inverts the step direction of the boundary being searched, while
/// the wrapped confidence is kept.
pub struct FlipOracle<C> {
    inner: C,
    boundary: Boundary,
    flip_call: usize,
    calls: Cell<usize>,
}

impl<C> FlipOracle<C> {
    pub fn new(inner: C, boundary: Boundary, flip_call: usize) -> Self {
        FlipOracle {
            inner,
            boundary,
            flip_call,
            calls: Cell::new(0),
        }
    }
}

impl<C: FrameClassifier> FrameClassifier for FlipOracle<C> {
    fn context_radius(&self) -> usize {
        self.inner.context_radius()
    }

    fn classify(&self, t: FrameIndex, video_length: usize) -> Result<ConfidenceVector> {
        let p = self.inner.classify(t, video_length)?;
        let call = self.calls.get();
        self.calls.set(call + 1);
        if call != self.flip_call {
            return Ok(p);
        }
        let predicted = p.argmax();
        let flipped = match self.boundary {
            Boundary::End => {
                if predicted == GiClass::Colorectum {
                    GiClass::SmallIntestine
                } else {
                    GiClass::Colorectum
                }
            }
            Boundary::Start => {
                if predicted == GiClass::EsophagusStomach {
                    GiClass::SmallIntestine
                } else {
                    GiClass::EsophagusStomach
                }
            }
        };
        Ok(peaked_vector(flipped, p.get(predicted)))
    }
}
