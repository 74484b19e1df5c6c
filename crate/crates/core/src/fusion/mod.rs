//! Inference for the transformer feature-fusion classifier.
//!
//! A probe at frame `t` gathers the stored features of the `2N+1` frames
//! around it and runs them through: per-head query/key/value projections,
//! scaled dot-product attention over the window (eight heads), head
//! concatenation plus an affine combine step, a two-layer residual block
//! applied per frame, and a two-layer head over the flattened window that
//! yields three class logits, softmaxed into a confidence vector for the
//! center frame. No positional encoding is applied anywhere.
//!
//! Reductions across window positions (softmax normalizers and the value
//! mixing) accumulate in value-sorted order, which makes the attention
//! block exactly permutation-equivariant: permuting the input frames
//! permutes the per-frame fused features bit for bit. The heads that follow
//! read fixed positions, so the full window output is position-dependent.

pub mod features;
pub mod weights;

pub use features::FeatureTable;
pub use weights::{Affine, FusionWeights, Matrix};

use crate::error::{Error, Result};
use crate::types::{ConfidenceVector, GiClass};

/// Number of self-attention heads.
pub const NUM_HEADS: usize = 8;

/// Row-softmaxed attention weights over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    rows: Vec<Vec<f64>>,
}

impl AttentionMatrix {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }
}

/// Sum in value-sorted order: invariant under permutation of the terms.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax: the maximum is subtracted before
/// exponentiation and the normalizer accumulates in value-sorted order.
fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total = sorted_sum(exps.clone());
    exps.into_iter().map(|e| e / total).collect()
}

/// Scaled dot-product attention: raw score `q_i . k_j / sqrt(dim)`, then a
/// softmax over every row.
pub fn attention_scores(
    queries: &[Vec<f64>],
    keys: &[Vec<f64>],
    dim: usize,
) -> Result<AttentionMatrix> {
    if queries.is_empty() || queries.len() != keys.len() {
        return Err(Error::ShapeMismatch {
            tensor: "attention".into(),
            reason: format!(
                "need matching non-empty query/key lists, got {} and {}",
                queries.len(),
                keys.len()
            ),
        });
    }
    if dim == 0 {
        return Err(Error::ShapeMismatch {
            tensor: "attention".into(),
            reason: "dimension must be positive".into(),
        });
    }
    for (name, list) in [("query", queries), ("key", keys)] {
        if let Some(bad) = list.iter().find(|v| v.len() != dim) {
            return Err(Error::ShapeMismatch {
                tensor: format!("attention.{name}"),
                reason: format!("expected dimension {dim}, got {}", bad.len()),
            });
        }
    }
    let scale = (dim as f64).sqrt();
    let rows = queries
        .iter()
        .map(|q| {
            let scores: Vec<f64> = keys.iter().map(|k| dot(q, k) / scale).collect();
            softmax(&scores)
        })
        .collect();
    Ok(AttentionMatrix { rows })
}

/// Attention-weighted mixture of value vectors, one fused value per frame.
fn mix_values(attention: &AttentionMatrix, values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = values[0].len();
    (0..attention.size())
        .map(|i| {
            (0..dim)
                .map(|c| {
                    sorted_sum(
                        (0..values.len())
                            .map(|j| attention.get(i, j) * values[j][c])
                            .collect(),
                    )
                })
                .collect()
        })
        .collect()
}

/// Per-frame fused features for one window: multi-head attention, head
/// concatenation, the affine combine, and the residual block. Keeps one
/// vector per input frame.
pub fn fuse_frames(window: &[&[f64]], weights: &FusionWeights) -> Result<Vec<Vec<f64>>> {
    weights.check_window(window)?;
    let mut mixed_per_head = Vec::with_capacity(NUM_HEADS);
    for head in 0..NUM_HEADS {
        let queries: Vec<Vec<f64>> = window.iter().map(|f| weights.query(head).apply(f)).collect();
        let keys: Vec<Vec<f64>> = window.iter().map(|f| weights.key(head).apply(f)).collect();
        let values: Vec<Vec<f64>> = window.iter().map(|f| weights.value(head).apply(f)).collect();
        let attention = attention_scores(&queries, &keys, weights.head_dim())?;
        mixed_per_head.push(mix_values(&attention, &values));
    }
    let mut fused = Vec::with_capacity(window.len());
    for i in 0..window.len() {
        let mut concat = Vec::with_capacity(weights.feature_dim());
        for mixed in &mixed_per_head {
            concat.extend_from_slice(&mixed[i]);
        }
        let combined = weights.combine().apply(&concat);
        let expanded = weights.residual_expand().apply(&combined);
        let projected = weights.residual_project().apply(&expanded);
        fused.push(
            combined
                .iter()
                .zip(&projected)
                .map(|(a, b)| a + b)
                .collect(),
        );
    }
    Ok(fused)
}

/// Confidence vector for the center frame of a window.
pub fn fuse_window(window: &[&[f64]], weights: &FusionWeights) -> Result<ConfidenceVector> {
    let fused = fuse_frames(window, weights)?;
    let flat: Vec<f64> = fused.into_iter().flatten().collect();
    let hidden = weights.head_hidden().apply(&flat);
    let logits = weights.head_logits().apply(&hidden);
    let p = softmax(&logits);
    ConfidenceVector::new([p[0], p[1], p[2]])
}

/// Single-frame classifier: softmax of an affine map to three logits.
pub fn linear_head(feature: &[f64], layer: &Affine) -> Result<ConfidenceVector> {
    if layer.out_dim() != 3 {
        return Err(Error::ShapeMismatch {
            tensor: "linear.weight".into(),
            reason: format!("expected 3 output logits, got {}", layer.out_dim()),
        });
    }
    if feature.len() != layer.in_dim() {
        return Err(Error::ShapeMismatch {
            tensor: "linear.weight".into(),
            reason: format!(
                "expected input dimension {}, got {}",
                layer.in_dim(),
                feature.len()
            ),
        });
    }
    let p = softmax(&layer.apply(feature));
    ConfidenceVector::new([p[0], p[1], p[2]])
}

/// Cross-entropy of a confidence vector against the true class, with the
/// probability floored at 1e-12.
pub fn cross_entropy(confidences: &ConfidenceVector, truth: GiClass) -> f64 {
    -confidences.get(truth).max(1e-12).ln()
}
