//! Argument structures and their resolution into engine types.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ceground::experiment::OracleSpec;
use ceground::sim::{
    generate_layout, ConfidenceModel, ConfusionMatrix, FileOracle, FusionOracle, NoisyOracle,
    NoisyOracleConfig, PerfectOracle, VideoLayout,
};
use ceground::{FrameClassifier, SearchConfig};

#[derive(Parser)]
#[command(
    name = "ceground",
    version,
    about = "Small-intestine grounding in capsule-endoscopy video: \
             boundary search, simulation, fusion inference, and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic video layout and optional per-frame confidences.
    Generate(GenerateArgs),
    /// Locate the small-intestine segment with the boundary search.
    Search(SearchCmdArgs),
    /// Locate the segment by classifying every frame (exhaustive baseline).
    Scan(ScanCmdArgs),
    /// Monte-Carlo grounding over seeded synthetic videos.
    Simulate(SimulateArgs),
    /// Run fusion inference over stored features, writing a confidence file.
    Fuse(FuseArgs),
    /// Score predictions against a ground-truth layout.
    Eval(EvalArgs),
}

#[derive(Args, Clone)]
pub struct SearchParams {
    /// Interval decay factor per probe; must stay in (0.5, 1) for fault
    /// tolerance.
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    /// Confidence threshold; strides scale with max(confidence - theta, 0).
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Minimum stride factor applied even to unconfident probes.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Starting position as a fraction of the video length.
    #[arg(long, default_value_t = 0.5)]
    pub initial_fraction: f64,
    /// Fold the decay factor into the stride as well.
    #[arg(long)]
    pub stride_alpha: bool,
}

impl SearchParams {
    pub fn build(&self) -> Result<SearchConfig> {
        Ok(SearchConfig::new(self.alpha, self.theta, self.epsilon)?
            .with_initial_fraction(self.initial_fraction)?
            .with_stride_alpha(self.stride_alpha))
    }
}

#[derive(Clone, Debug)]
pub struct Proportions(pub [f64; 3]);

fn parse_proportions(s: &str) -> std::result::Result<Proportions, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated proportions, got {}",
            parts.len()
        ));
    }
    let mut p = [0.0f64; 3];
    for (slot, part) in p.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("{part:?}: {e}"))?;
    }
    Ok(Proportions(p))
}

#[derive(Args, Clone)]
pub struct LayoutParams {
    /// Video length in frames (synthetic layouts).
    #[arg(long, short = 'T')]
    pub frames: Option<usize>,
    /// Class proportions: esophagus/stomach, small intestine, colorectum.
    #[arg(long, value_parser = parse_proportions, default_value = "0.072,0.449,0.479")]
    pub proportions: Proportions,
    /// Relative jitter applied to the proportions before placing boundaries.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
}

impl LayoutParams {
    pub fn descriptor(&self) -> Value {
        json!({
            "frames": self.frames,
            "proportions": self.proportions.0,
            "jitter": self.jitter,
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Perfect,
    Noisy,
    File,
    Fusion,
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::Perfect => "perfect",
            OracleKind::Noisy => "noisy",
            OracleKind::File => "file",
            OracleKind::Fusion => "fusion",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConfidenceModelKind {
    Fixed,
    Beta,
}

#[derive(Args, Clone)]
pub struct OracleArgs {
    /// Classifier oracle answering the probes.
    #[arg(long, value_enum, default_value_t = OracleKind::Perfect)]
    pub oracle: OracleKind,
    /// Winning-class confidence: exact for the perfect oracle and the fixed
    /// model, the mean for the beta model.
    #[arg(long, default_value_t = 0.9)]
    pub confidence: f64,
    /// Confusion-matrix preset (`resnet`, `resnet-tfe`) or a path to a 3x3
    /// table (noisy oracle).
    #[arg(long, default_value = "resnet-tfe")]
    pub matrix: String,
    /// Confidence model of the noisy oracle.
    #[arg(long, value_enum, default_value_t = ConfidenceModelKind::Fixed)]
    pub confidence_model: ConfidenceModelKind,
    /// Concentration of the beta confidence spread.
    #[arg(long, default_value_t = 20.0)]
    pub beta_concentration: f64,
    /// Per-frame confidence CSV backing the file oracle.
    #[arg(long)]
    pub confidences: Option<PathBuf>,
    /// Per-frame feature table backing the fusion oracle.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Named-tensor weights backing the fusion oracle.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Context radius of the fusion window.
    #[arg(long, default_value_t = 6)]
    pub radius: usize,
}

impl OracleArgs {
    pub fn confusion_matrix(&self) -> Result<ConfusionMatrix> {
        Ok(match self.matrix.as_str() {
            "resnet" => ConfusionMatrix::resnet(),
            "resnet-tfe" => ConfusionMatrix::resnet_tfe(),
            path => ConfusionMatrix::load(Path::new(path))
                .with_context(|| format!("loading confusion matrix from {path}"))?,
        })
    }

    pub fn confidence_model(&self) -> ConfidenceModel {
        match self.confidence_model {
            ConfidenceModelKind::Fixed => ConfidenceModel::Fixed(self.confidence),
            ConfidenceModelKind::Beta => ConfidenceModel::Beta {
                mean: self.confidence,
                concentration: self.beta_concentration,
            },
        }
    }

    /// Spec for the synthetic oracles used by `simulate` and `generate`.
    pub fn synthetic_spec(&self) -> Result<OracleSpec> {
        Ok(match self.oracle {
            OracleKind::Perfect => OracleSpec::Perfect {
                confidence: self.confidence,
            },
            OracleKind::Noisy => OracleSpec::Noisy {
                matrix: self.confusion_matrix()?,
                confidence: self.confidence_model(),
            },
            other => bail!(
                "the {} oracle cannot synthesize videos; use `perfect` or `noisy`",
                other.name()
            ),
        })
    }

    pub fn descriptor(&self) -> Value {
        let mut desc = json!({
            "kind": self.oracle.name(),
        });
        let obj = desc.as_object_mut().expect("descriptor is an object");
        match self.oracle {
            OracleKind::Perfect => {
                obj.insert("confidence".into(), json!(self.confidence));
            }
            OracleKind::Noisy => {
                obj.insert("matrix".into(), json!(self.matrix));
                obj.insert("confidence".into(), json!(self.confidence));
                obj.insert(
                    "confidence_model".into(),
                    json!(match self.confidence_model {
                        ConfidenceModelKind::Fixed => "fixed",
                        ConfidenceModelKind::Beta => "beta",
                    }),
                );
                if self.confidence_model == ConfidenceModelKind::Beta {
                    obj.insert("beta_concentration".into(), json!(self.beta_concentration));
                }
            }
            OracleKind::File => {
                obj.insert("confidences".into(), json!(self.confidences));
            }
            OracleKind::Fusion => {
                obj.insert("features".into(), json!(self.features));
                obj.insert("weights".into(), json!(self.weights));
                obj.insert("radius".into(), json!(self.radius));
            }
        }
        desc
    }
}

/// An oracle ready to probe, together with the video length it covers and
/// the ground truth when one is known.
pub struct ResolvedOracle {
    pub classifier: Box<dyn FrameClassifier>,
    pub frames: usize,
    pub truth: Option<VideoLayout>,
}

/// Build the oracle for `search`/`scan`: synthetic oracles take their truth
/// from `--layout` or generate one from the layout parameters and seed;
/// file and fusion oracles derive the video length from their data and
/// accept an optional `--layout` for scoring.
pub fn resolve_oracle(
    oracle: &OracleArgs,
    layout_path: &Option<PathBuf>,
    layout_params: &LayoutParams,
    seed: u64,
) -> Result<ResolvedOracle> {
    let loaded_layout = match layout_path {
        Some(path) => Some(
            VideoLayout::load(path)
                .with_context(|| format!("loading layout from {}", path.display()))?,
        ),
        None => None,
    };
    match oracle.oracle {
        OracleKind::Perfect | OracleKind::Noisy => {
            let layout = match loaded_layout {
                Some(layout) => layout,
                None => {
                    let frames = layout_params
                        .frames
                        .context("--frames is required when no --layout file is given")?;
                    generate_layout(
                        frames,
                        layout_params.proportions.0,
                        layout_params.jitter,
                        seed,
                    )?
                }
            };
            let frames = layout.frames();
            let classifier: Box<dyn FrameClassifier> = match oracle.oracle {
                OracleKind::Perfect => {
                    Box::new(PerfectOracle::new(layout.clone(), oracle.confidence)?)
                }
                _ => Box::new(NoisyOracle::new(
                    layout.clone(),
                    NoisyOracleConfig {
                        matrix: oracle.confusion_matrix()?,
                        confidence: oracle.confidence_model(),
                        seed,
                    },
                )?),
            };
            Ok(ResolvedOracle {
                classifier,
                frames,
                truth: Some(layout),
            })
        }
        OracleKind::File => {
            let path = oracle
                .confidences
                .as_ref()
                .context("--confidences is required for the file oracle")?;
            let file_oracle = FileOracle::load(path)
                .with_context(|| format!("loading confidences from {}", path.display()))?;
            let frames = file_oracle.frames();
            check_frames(&loaded_layout, layout_params, frames)?;
            Ok(ResolvedOracle {
                classifier: Box::new(file_oracle),
                frames,
                truth: loaded_layout,
            })
        }
        OracleKind::Fusion => {
            let features = oracle
                .features
                .as_ref()
                .context("--features is required for the fusion oracle")?;
            let weights = oracle
                .weights
                .as_ref()
                .context("--weights is required for the fusion oracle")?;
            let fusion_oracle = FusionOracle::load(features, weights, oracle.radius)?;
            let frames = fusion_oracle.frames();
            check_frames(&loaded_layout, layout_params, frames)?;
            Ok(ResolvedOracle {
                classifier: Box::new(fusion_oracle),
                frames,
                truth: loaded_layout,
            })
        }
    }
}

fn check_frames(
    layout: &Option<VideoLayout>,
    params: &LayoutParams,
    frames: usize,
) -> Result<()> {
    if let Some(layout) = layout {
        ensure!(
            layout.frames() == frames,
            "layout covers {} frame(s) but the oracle data covers {frames}",
            layout.frames()
        );
    }
    if let Some(requested) = params.frames {
        ensure!(
            requested == frames,
            "--frames {requested} does not match the oracle data ({frames} frames)"
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub layout: LayoutParams,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the layout file (`frames start end`).
    #[arg(long)]
    pub layout_out: Option<PathBuf>,
    /// Also emit a per-frame confidence CSV from the synthetic oracle.
    #[arg(long)]
    pub confidences_out: Option<PathBuf>,
    /// Write the report to a file as well as stdout.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct SearchCmdArgs {
    #[command(flatten)]
    pub search: SearchParams,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub layout_params: LayoutParams,
    /// Ground-truth layout file (truth for synthetic oracles, scoring for
    /// file/fusion oracles).
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Omit the probe-by-probe traces from the machine report.
    #[arg(long)]
    pub no_trace: bool,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScanCmdArgs {
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub layout_params: LayoutParams,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Number of seeded trials.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[command(flatten)]
    pub layout: LayoutParams,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub search: SearchParams,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include per-trial outcomes in the machine report.
    #[arg(long)]
    pub trial_details: bool,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct FuseArgs {
    /// Per-frame feature table.
    #[arg(long)]
    pub features: PathBuf,
    /// Named-tensor weights file.
    #[arg(long)]
    pub weights: PathBuf,
    /// Context radius of the fusion window.
    #[arg(long, default_value_t = 6)]
    pub radius: usize,
    /// Where to write the per-frame confidence CSV.
    #[arg(long)]
    pub confidences_out: PathBuf,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Ground-truth layout file.
    #[arg(long)]
    pub layout: PathBuf,
    /// Predicted segment to score, as `start,end`.
    #[arg(long)]
    pub segment: Option<String>,
    /// Per-frame confidence CSV to score frame by frame.
    #[arg(long)]
    pub confidences: Option<PathBuf>,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}
