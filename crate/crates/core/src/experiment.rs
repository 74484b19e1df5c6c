//! Seeded Monte-Carlo harness: generate a fresh synthetic video per trial,
//! ground it, and aggregate the scores. Trial `i` derives its seed as
//! `seed + i`, so results are reproducible and order-independent.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{deviation_summary, grounding_result, quantile, DeviationSummary, GroundingResult};
use crate::search::{ground_small_intestine, SearchConfig};
use crate::sim::{
    generate_layout, ConfidenceModel, ConfusionMatrix, NoisyOracle, NoisyOracleConfig,
    PerfectOracle, VideoLayout,
};
use crate::types::{FrameClassifier, Segment};

/// Which synthetic oracle answers the probes of a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OracleSpec {
    Perfect { confidence: f64 },
    Noisy {
        matrix: ConfusionMatrix,
        confidence: ConfidenceModel,
    },
}

impl OracleSpec {
    pub fn build(&self, layout: VideoLayout, seed: u64) -> Result<Box<dyn FrameClassifier>> {
        Ok(match self {
            OracleSpec::Perfect { confidence } => {
                Box::new(PerfectOracle::new(layout, *confidence)?)
            }
            OracleSpec::Noisy { matrix, confidence } => Box::new(NoisyOracle::new(
                layout,
                NoisyOracleConfig {
                    matrix: matrix.clone(),
                    confidence: *confidence,
                    seed,
                },
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub frames: usize,
    pub proportions: [f64; 3],
    pub jitter: f64,
    pub oracle: OracleSpec,
    pub search: SearchConfig,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub truth: Segment,
    pub result: GroundingResult,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IouStats {
    pub mean: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub trials: usize,
    pub iou: IouStats,
    pub start_error: DeviationSummary,
    pub end_error: DeviationSummary,
    pub mean_oracle_calls: f64,
    pub degenerate_trials: usize,
}

pub fn run_trial(config: &SimulationConfig, trial: usize) -> Result<TrialOutcome> {
    let seed = config.seed.wrapping_add(trial as u64);
    let layout = generate_layout(config.frames, config.proportions, config.jitter, seed)?;
    let oracle = config.oracle.build(layout.clone(), seed)?;
    let grounding = ground_small_intestine(oracle.as_ref(), config.frames, &config.search)?;
    let result = grounding_result(
        &grounding.segment,
        &layout.segment(),
        grounding.oracle_calls(),
    );
    Ok(TrialOutcome {
        trial,
        seed,
        truth: layout.segment(),
        result,
        degenerate: grounding.degenerate,
    })
}

/// Run every trial and aggregate. Returns the summary together with the
/// per-trial outcomes, in trial order.
pub fn run_simulation(config: &SimulationConfig) -> Result<(SimulationSummary, Vec<TrialOutcome>)> {
    if config.trials == 0 {
        return Err(Error::InvalidExperiment {
            reason: "need at least one trial".into(),
        });
    }
    let mut outcomes = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        outcomes.push(run_trial(config, trial)?);
    }
    let ious: Vec<f64> = outcomes.iter().map(|o| o.result.iou).collect();
    let start_errors: Vec<f64> = outcomes.iter().map(|o| o.result.start_error as f64).collect();
    let end_errors: Vec<f64> = outcomes.iter().map(|o| o.result.end_error as f64).collect();
    let n = ious.len() as f64;
    let mean = ious.iter().sum::<f64>() / n;
    let std = if ious.len() > 1 {
        (ious.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let half_width = 1.96 * std / n.sqrt();
    let mut sorted = ious.clone();
    sorted.sort_by(f64::total_cmp);
    let iou = IouStats {
        mean,
        ci95_low: mean - half_width,
        ci95_high: mean + half_width,
        median: quantile(&sorted, 0.5),
        lower_quartile: quantile(&sorted, 0.25),
        upper_quartile: quantile(&sorted, 0.75),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    };
    let summary = SimulationSummary {
        trials: config.trials,
        iou,
        start_error: deviation_summary(&start_errors)?,
        end_error: deviation_summary(&end_errors)?,
        mean_oracle_calls: outcomes
            .iter()
            .map(|o| o.result.oracle_calls as f64)
            .sum::<f64>()
            / n,
        degenerate_trials: outcomes.iter().filter(|o| o.degenerate).count(),
    };
    Ok((summary, outcomes))
}
