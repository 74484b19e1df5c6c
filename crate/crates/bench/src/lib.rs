//! Shared fixtures for the criterion benches.

use ceground::fusion::features::random_features;
use ceground::fusion::weights::random_weights;
use ceground::fusion::FusionWeights;
use ceground::sim::{
    generate_layout, ConfidenceModel, ConfusionMatrix, NoisyOracle, NoisyOracleConfig,
    PerfectOracle,
};

/// Average full-length video (about 11.5 hours at 3 fps).
pub const FULL_VIDEO_FRAMES: usize = 125_100;

pub const PROPORTIONS: [f64; 3] = [0.072, 0.449, 0.479];

pub fn full_video_perfect_oracle() -> PerfectOracle {
    let layout = generate_layout(FULL_VIDEO_FRAMES, PROPORTIONS, 0.0, 0).expect("valid layout");
    PerfectOracle::new(layout, 1.0).expect("valid confidence")
}

pub fn noisy_oracle(frames: usize) -> NoisyOracle {
    let layout = generate_layout(frames, PROPORTIONS, 0.0, 0).expect("valid layout");
    NoisyOracle::new(
        layout,
        NoisyOracleConfig {
            matrix: ConfusionMatrix::resnet_tfe(),
            confidence: ConfidenceModel::Fixed(0.9),
            seed: 7,
        },
    )
    .expect("valid config")
}

/// Weights and a feature window at a realistic scale: 64-dimensional
/// features fused over a 13-frame window.
pub fn fusion_fixture() -> (FusionWeights, Vec<Vec<f64>>) {
    let weights = random_weights(64, 64, 64, 32, 6, 1);
    let features = random_features(weights.window_len(), 64, 2);
    let window = (1..=weights.window_len())
        .map(|t| features.frame(t).to_vec())
        .collect();
    (weights, window)
}
