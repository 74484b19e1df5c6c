//! Named-tensor weight container and its plain-text file format.
//!
//! A weights file is a sequence of records:
//!
//! ```text
//! tensor <name> <rank> <d1> ... <dk>
//! <row-major whitespace-separated decimals>
//! ```
//!
//! The tensor names are fixed (`attn.query.{h}.weight`, ..., see
//! [`FusionWeights`]); unknown or missing names are rejected so a truncated
//! or misspelled file fails at load, not at inference. Hidden widths are
//! whatever the file says — the loader only checks that the shapes agree
//! with each other.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NUM_HEADS;
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let fail = |reason: String| Error::ShapeMismatch {
            tensor: "matrix".into(),
            reason,
        };
        if rows == 0 || cols == 0 {
            return Err(fail(format!("dimensions must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(fail(format!(
                "{rows}x{cols} needs {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(fail(format!("non-finite element {bad}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Affine map `W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    weight: Matrix,
    bias: Vec<f64>,
}

impl Affine {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::ShapeMismatch {
                tensor: "bias".into(),
                reason: format!(
                    "bias length {} does not match {} output rows",
                    bias.len(),
                    weight.rows()
                ),
            });
        }
        if let Some(bad) = bias.iter().find(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch {
                tensor: "bias".into(),
                reason: format!("non-finite element {bad}"),
            });
        }
        Ok(Affine { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim(), "affine input dimension");
        (0..self.out_dim())
            .map(|i| {
                self.weight
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    + self.bias[i]
            })
            .collect()
    }
}

/// All parameters of the fusion classifier, shape-checked against each
/// other at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    query: Vec<Affine>,
    key: Vec<Affine>,
    value: Vec<Affine>,
    combine: Affine,
    residual_expand: Affine,
    residual_project: Affine,
    head_hidden: Affine,
    head_logits: Affine,
    window_len: usize,
}

impl FusionWeights {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        query: Vec<Affine>,
        key: Vec<Affine>,
        value: Vec<Affine>,
        combine: Affine,
        residual_expand: Affine,
        residual_project: Affine,
        head_hidden: Affine,
        head_logits: Affine,
    ) -> Result<Self> {
        let expect = |ok: bool, tensor: &str, reason: String| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::ShapeMismatch {
                    tensor: tensor.into(),
                    reason,
                })
            }
        };
        for (name, list) in [("query", &query), ("key", &key), ("value", &value)] {
            expect(
                list.len() == NUM_HEADS,
                &format!("attn.{name}"),
                format!("expected {NUM_HEADS} heads, got {}", list.len()),
            )?;
        }
        let feature_dim = query[0].in_dim();
        let head_dim = query[0].out_dim();
        expect(
            feature_dim.is_multiple_of(NUM_HEADS) && head_dim == feature_dim / NUM_HEADS,
            "attn.query.0.weight",
            format!(
                "per-head dimension must be feature dimension / {NUM_HEADS}; \
                 got head {head_dim} for features {feature_dim}"
            ),
        )?;
        for (name, list) in [("query", &query), ("key", &key), ("value", &value)] {
            for (h, layer) in list.iter().enumerate() {
                expect(
                    layer.in_dim() == feature_dim && layer.out_dim() == head_dim,
                    &format!("attn.{name}.{h}.weight"),
                    format!(
                        "expected {head_dim}x{feature_dim}, got {}x{}",
                        layer.out_dim(),
                        layer.in_dim()
                    ),
                )?;
            }
        }
        expect(
            combine.in_dim() == NUM_HEADS * head_dim,
            "attn.combine.weight",
            format!(
                "expected input dimension {}, got {}",
                NUM_HEADS * head_dim,
                combine.in_dim()
            ),
        )?;
        let fused_dim = combine.out_dim();
        expect(
            residual_expand.in_dim() == fused_dim,
            "residual.fc1.weight",
            format!(
                "expected input dimension {fused_dim}, got {}",
                residual_expand.in_dim()
            ),
        )?;
        expect(
            residual_project.in_dim() == residual_expand.out_dim(),
            "residual.fc2.weight",
            format!(
                "expected input dimension {}, got {}",
                residual_expand.out_dim(),
                residual_project.in_dim()
            ),
        )?;
        expect(
            residual_project.out_dim() == fused_dim,
            "residual.fc2.weight",
            format!(
                "residual block must map back to width {fused_dim}, got {}",
                residual_project.out_dim()
            ),
        )?;
        expect(
            head_hidden.in_dim().is_multiple_of(fused_dim),
            "head.fc1.weight",
            format!(
                "input dimension {} is not a multiple of the fused width {fused_dim}",
                head_hidden.in_dim()
            ),
        )?;
        let window_len = head_hidden.in_dim() / fused_dim;
        expect(
            window_len % 2 == 1,
            "head.fc1.weight",
            format!("window must cover 2N+1 frames, got an even {window_len}"),
        )?;
        expect(
            head_logits.in_dim() == head_hidden.out_dim(),
            "head.fc2.weight",
            format!(
                "expected input dimension {}, got {}",
                head_hidden.out_dim(),
                head_logits.in_dim()
            ),
        )?;
        expect(
            head_logits.out_dim() == 3,
            "head.fc2.weight",
            format!("expected 3 output logits, got {}", head_logits.out_dim()),
        )?;
        Ok(FusionWeights {
            query,
            key,
            value,
            combine,
            residual_expand,
            residual_project,
            head_hidden,
            head_logits,
            window_len,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.query[0].in_dim()
    }

    pub fn head_dim(&self) -> usize {
        self.query[0].out_dim()
    }

    pub fn fused_dim(&self) -> usize {
        self.combine.out_dim()
    }

    /// Window length `2N+1` implied by the head input width.
    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Context radius `N`.
    pub fn radius(&self) -> usize {
        (self.window_len - 1) / 2
    }

    pub fn query(&self, head: usize) -> &Affine {
        &self.query[head]
    }

    pub fn key(&self, head: usize) -> &Affine {
        &self.key[head]
    }

    pub fn value(&self, head: usize) -> &Affine {
        &self.value[head]
    }

    pub fn combine(&self) -> &Affine {
        &self.combine
    }

    pub fn residual_expand(&self) -> &Affine {
        &self.residual_expand
    }

    pub fn residual_project(&self) -> &Affine {
        &self.residual_project
    }

    pub fn head_hidden(&self) -> &Affine {
        &self.head_hidden
    }

    pub fn head_logits(&self) -> &Affine {
        &self.head_logits
    }

    pub(crate) fn check_window(&self, window: &[&[f64]]) -> Result<()> {
        if window.len() != self.window_len {
            return Err(Error::ShapeMismatch {
                tensor: "window".into(),
                reason: format!(
                    "expected {} frames (2N+1), got {}",
                    self.window_len,
                    window.len()
                ),
            });
        }
        for (i, frame) in window.iter().enumerate() {
            if frame.len() != self.feature_dim() {
                return Err(Error::ShapeMismatch {
                    tensor: "window".into(),
                    reason: format!(
                        "frame {i} has dimension {}, expected {}",
                        frame.len(),
                        self.feature_dim()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let context = path.display().to_string();
        let file = File::open(path).map_err(|source| Error::Io {
            context: context.clone(),
            source,
        })?;
        FusionWeights::from_reader(BufReader::new(file), &context)
    }

    pub fn from_reader<R: BufRead>(reader: R, context: &str) -> Result<Self> {
        let mut tensors = parse_tensors(reader, context)?;
        let mut affine = |name: &str| -> Result<Affine> {
            let weight_name = format!("{name}.weight");
            let bias_name = format!("{name}.bias");
            let (shape, data) = take_tensor(&mut tensors, &weight_name, 2)?;
            let weight = Matrix::new(shape[0], shape[1], data).map_err(|e| rename(e, &weight_name))?;
            let (_, bias) = take_tensor(&mut tensors, &bias_name, 1)?;
            Affine::new(weight, bias).map_err(|e| rename(e, &bias_name))
        };
        let mut query = Vec::with_capacity(NUM_HEADS);
        let mut key = Vec::with_capacity(NUM_HEADS);
        let mut value = Vec::with_capacity(NUM_HEADS);
        for h in 0..NUM_HEADS {
            query.push(affine(&format!("attn.query.{h}"))?);
            key.push(affine(&format!("attn.key.{h}"))?);
            value.push(affine(&format!("attn.value.{h}"))?);
        }
        let combine = affine("attn.combine")?;
        let residual_expand = affine("residual.fc1")?;
        let residual_project = affine("residual.fc2")?;
        let head_hidden = affine("head.fc1")?;
        let head_logits = affine("head.fc2")?;
        if let Some((name, tensor)) = tensors.into_iter().next() {
            return Err(Error::Parse {
                context: context.to_string(),
                line: tensor.line,
                reason: format!("unknown tensor name `{name}`"),
            });
        }
        FusionWeights::from_parts(
            query,
            key,
            value,
            combine,
            residual_expand,
            residual_project,
            head_hidden,
            head_logits,
        )
    }

    /// Serialize in the canonical tensor order; `load` reads the result
    /// back bit-exactly.
    pub fn write_to<W: Write>(&self, writer: &mut W) -> Result<()> {
        let mut emit = |name: &str, layer: &Affine| -> Result<()> {
            write_matrix(writer, &format!("{name}.weight"), layer.weight())?;
            write_vector(writer, &format!("{name}.bias"), layer.bias())
        };
        for h in 0..NUM_HEADS {
            emit(&format!("attn.query.{h}"), &self.query[h])?;
            emit(&format!("attn.key.{h}"), &self.key[h])?;
            emit(&format!("attn.value.{h}"), &self.value[h])?;
        }
        emit("attn.combine", &self.combine)?;
        emit("residual.fc1", &self.residual_expand)?;
        emit("residual.fc2", &self.residual_project)?;
        emit("head.fc1", &self.head_hidden)?;
        emit("head.fc2", &self.head_logits)
    }
}

fn rename(e: Error, tensor: &str) -> Error {
    match e {
        Error::ShapeMismatch { reason, .. } => Error::ShapeMismatch {
            tensor: tensor.into(),
            reason,
        },
        other => other,
    }
}

fn io_err(context: &str, source: std::io::Error) -> Error {
    Error::Io {
        context: context.to_string(),
        source,
    }
}

fn write_matrix<W: Write>(writer: &mut W, name: &str, matrix: &Matrix) -> Result<()> {
    writeln!(writer, "tensor {name} 2 {} {}", matrix.rows(), matrix.cols())
        .map_err(|e| io_err("weights writer", e))?;
    for i in 0..matrix.rows() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(writer, "{}", row.join(" ")).map_err(|e| io_err("weights writer", e))?;
    }
    Ok(())
}

fn write_vector<W: Write>(writer: &mut W, name: &str, values: &[f64]) -> Result<()> {
    writeln!(writer, "tensor {name} 1 {}", values.len())
        .map_err(|e| io_err("weights writer", e))?;
    let row: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    writeln!(writer, "{}", row.join(" ")).map_err(|e| io_err("weights writer", e))
}

struct RawTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    line: usize,
}

fn parse_tensors<R: BufRead>(reader: R, context: &str) -> Result<BTreeMap<String, RawTensor>> {
    let mut tensors: BTreeMap<String, RawTensor> = BTreeMap::new();
    // (name, shape, expected element count, declaration line)
    let mut current: Option<(String, Vec<usize>, usize, usize)> = None;
    let mut values: Vec<f64> = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| io_err(context, source))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            context: context.to_string(),
            line: number + 1,
            reason,
        };
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match &current {
            None => {
                if tokens[0] != "tensor" {
                    return Err(parse_err(format!(
                        "expected `tensor <name> <rank> <dims...>`, found {:?}",
                        tokens[0]
                    )));
                }
                if tokens.len() < 3 {
                    return Err(parse_err("tensor header is missing its rank".into()));
                }
                let name = tokens[1].to_string();
                let rank: usize = tokens[2]
                    .parse()
                    .map_err(|_| parse_err(format!("{:?} is not a rank", tokens[2])))?;
                if tokens.len() != 3 + rank {
                    return Err(parse_err(format!(
                        "rank {rank} tensor needs {rank} dimension(s), found {}",
                        tokens.len() - 3
                    )));
                }
                let mut shape = Vec::with_capacity(rank);
                for dim in &tokens[3..] {
                    let d: usize = dim
                        .parse()
                        .map_err(|_| parse_err(format!("{dim:?} is not a dimension")))?;
                    if d == 0 {
                        return Err(parse_err("dimensions must be positive".into()));
                    }
                    shape.push(d);
                }
                if tensors.contains_key(&name) {
                    return Err(parse_err(format!("duplicate tensor `{name}`")));
                }
                let count = shape.iter().product();
                current = Some((name, shape, count, number + 1));
                values = Vec::with_capacity(count);
            }
            Some((name, _, count, _)) => {
                for token in &tokens {
                    if values.len() == *count {
                        return Err(parse_err(format!("too many values for tensor `{name}`")));
                    }
                    let v: f64 = token
                        .parse()
                        .map_err(|_| parse_err(format!("{token:?} is not a number")))?;
                    if !v.is_finite() {
                        return Err(parse_err(format!("non-finite value in tensor `{name}`")));
                    }
                    values.push(v);
                }
                if values.len() == *count {
                    let (name, shape, _, line) = current.take().expect("tensor in progress");
                    tensors.insert(
                        name,
                        RawTensor {
                            shape,
                            data: std::mem::take(&mut values),
                            line,
                        },
                    );
                }
            }
        }
    }
    if let Some((name, _, count, line)) = current {
        return Err(Error::Parse {
            context: context.to_string(),
            line,
            reason: format!(
                "tensor `{name}` expected {count} value(s), file ended after {}",
                values.len()
            ),
        });
    }
    Ok(tensors)
}

fn take_tensor(
    tensors: &mut BTreeMap<String, RawTensor>,
    name: &str,
    rank: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let tensor = tensors.remove(name).ok_or_else(|| Error::ShapeMismatch {
        tensor: name.into(),
        reason: "missing from weights file".into(),
    })?;
    if tensor.shape.len() != rank {
        return Err(Error::ShapeMismatch {
            tensor: name.into(),
            reason: format!("expected rank {rank}, got {}", tensor.shape.len()),
        });
    }
    Ok((tensor.shape, tensor.data))
}

/// Seeded random weights for fixtures, demos, and benchmarks.
pub fn random_weights(
    feature_dim: usize,
    fused_dim: usize,
    residual_hidden: usize,
    head_hidden: usize,
    radius: usize,
    seed: u64,
) -> FusionWeights {
    assert!(
        feature_dim.is_multiple_of(NUM_HEADS),
        "feature dimension must be a multiple of {NUM_HEADS}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut affine = |out: usize, inp: usize| -> Affine {
        let data: Vec<f64> = (0..out * inp).map(|_| rng.random_range(-0.5..0.5)).collect();
        let bias: Vec<f64> = (0..out).map(|_| rng.random_range(-0.5..0.5)).collect();
        Affine::new(Matrix::new(out, inp, data).expect("valid shape"), bias).expect("valid bias")
    };
    let head_dim = feature_dim / NUM_HEADS;
    let window = 2 * radius + 1;
    let query = (0..NUM_HEADS).map(|_| affine(head_dim, feature_dim)).collect();
    let key = (0..NUM_HEADS).map(|_| affine(head_dim, feature_dim)).collect();
    let value = (0..NUM_HEADS).map(|_| affine(head_dim, feature_dim)).collect();
    let combine = affine(fused_dim, feature_dim);
    let residual_expand = affine(residual_hidden, fused_dim);
    let residual_project = affine(fused_dim, residual_hidden);
    let head_hidden = affine(head_hidden, window * fused_dim);
    let head_logits = affine(3, head_hidden.out_dim());
    FusionWeights::from_parts(
        query,
        key,
        value,
        combine,
        residual_expand,
        residual_project,
        head_hidden,
        head_logits,
    )
    .expect("randomly generated shapes are consistent")
}
