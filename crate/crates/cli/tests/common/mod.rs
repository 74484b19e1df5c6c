//! Shared test support: running the binary, parsing machine reports, and an
//! independent straight-line re-implementation of the fusion forward pass.

// The scratch oracle below is deliberately written in plain indexed style.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::Path;
use std::process::{Command, Output};

use ceground::fusion::{Affine, FusionWeights};

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ceground"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn run_cli_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ceground"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed with {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).expect("utf-8 output")
}

/// The JSON line after the machine marker.
pub fn machine_json(stdout: &str) -> serde_json::Value {
    let marker = "--- machine ---\n";
    let at = stdout
        .find(marker)
        .unwrap_or_else(|| panic!("no machine marker in output:\n{stdout}"));
    serde_json::from_str(stdout[at + marker.len()..].trim()).expect("valid machine JSON")
}

/// Independent fusion forward pass written as one straight-line function
/// over the raw weight matrices: plain nested loops, natural accumulation
/// order, no shared code with the engine's fusion module.
pub fn scratch_fuse(window: &[Vec<f64>], weights: &FusionWeights) -> [f64; 3] {
    let len = window.len();
    let head_dim = weights.head_dim();
    let scale = (head_dim as f64).sqrt();

    let apply = |layer: &Affine, x: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(layer.out_dim());
        for i in 0..layer.out_dim() {
            let mut acc = layer.bias()[i];
            for j in 0..layer.in_dim() {
                acc += layer.weight().get(i, j) * x[j];
            }
            out.push(acc);
        }
        out
    };

    let mut per_frame_concat: Vec<Vec<f64>> = vec![Vec::new(); len];
    for head in 0..8 {
        let queries: Vec<Vec<f64>> = window.iter().map(|f| apply(weights.query(head), f)).collect();
        let keys: Vec<Vec<f64>> = window.iter().map(|f| apply(weights.key(head), f)).collect();
        let values: Vec<Vec<f64>> = window.iter().map(|f| apply(weights.value(head), f)).collect();
        for i in 0..len {
            let mut scores = vec![0.0f64; len];
            for j in 0..len {
                let mut dot = 0.0;
                for c in 0..head_dim {
                    dot += queries[i][c] * keys[j][c];
                }
                scores[j] = dot / scale;
            }
            let mut max = f64::NEG_INFINITY;
            for &s in &scores {
                if s > max {
                    max = s;
                }
            }
            let mut total = 0.0;
            let mut exps = vec![0.0f64; len];
            for j in 0..len {
                exps[j] = (scores[j] - max).exp();
                total += exps[j];
            }
            let mut mixed = vec![0.0f64; head_dim];
            for j in 0..len {
                let attention = exps[j] / total;
                for c in 0..head_dim {
                    mixed[c] += attention * values[j][c];
                }
            }
            per_frame_concat[i].extend_from_slice(&mixed);
        }
    }

    let mut flattened = Vec::new();
    for concat in &per_frame_concat {
        let combined = apply(weights.combine(), concat);
        let hidden = apply(weights.residual_expand(), &combined);
        let projected = apply(weights.residual_project(), &hidden);
        for (a, b) in combined.iter().zip(&projected) {
            flattened.push(a + b);
        }
    }
    let hidden = apply(weights.head_hidden(), &flattened);
    let logits = apply(weights.head_logits(), &hidden);
    let mut max = f64::NEG_INFINITY;
    for &l in &logits {
        if l > max {
            max = l;
        }
    }
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    [exps[0] / total, exps[1] / total, exps[2] / total]
}
