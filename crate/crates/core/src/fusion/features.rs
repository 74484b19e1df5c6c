//! Per-frame feature storage and its plain-text file format: one record per
//! frame, `<frame_index> <m decimals>`, indices contiguous from 1.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Feature vectors for frames `1..=frames()`, all with the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let fail = |reason: String| Error::ShapeMismatch {
            tensor: "features".into(),
            reason,
        };
        let dim = match rows.first() {
            Some(first) if !first.is_empty() => first.len(),
            _ => return Err(fail("need at least one non-empty feature row".into())),
        };
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(fail(format!(
                    "frame {} has dimension {}, expected {dim}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(fail(format!("frame {} has non-finite value {bad}", i + 1)));
            }
            data.extend_from_slice(row);
        }
        Ok(FeatureTable { dim, data })
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Feature slice of a frame; `t` is 1-based and must be within
    /// `1..=frames()`.
    pub fn frame(&self, t: usize) -> &[f64] {
        assert!(t >= 1 && t <= self.frames(), "frame {t} out of range");
        &self.data[(t - 1) * self.dim..t * self.dim]
    }

    /// Window of `2 * radius + 1` feature slices centered on `t`, with
    /// positions clamped into `[1, limit]` (the boundary frame repeats past
    /// the edges).
    pub fn window(&self, t: usize, radius: usize, limit: usize) -> Vec<&[f64]> {
        let limit = limit.min(self.frames()).max(1) as i64;
        let t = t as i64;
        let radius = radius as i64;
        (t - radius..=t + radius)
            .map(|i| self.frame(i.clamp(1, limit) as usize))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let context = path.display().to_string();
        let file = File::open(path).map_err(|source| Error::Io {
            context: context.clone(),
            source,
        })?;
        FeatureTable::from_reader(BufReader::new(file), &context)
    }

    pub fn from_reader<R: BufRead>(reader: R, context: &str) -> Result<Self> {
        let mut dim = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
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
            let mut fields = trimmed.split_whitespace();
            let index_field = fields.next().expect("non-empty line");
            let frame: usize = index_field
                .parse()
                .map_err(|_| parse_err(format!("{index_field:?} is not a frame index")))?;
            let expected = rows.len() + 1;
            if frame != expected {
                return Err(parse_err(format!(
                    "expected frame {expected}, found frame {frame}"
                )));
            }
            let mut row = Vec::new();
            for field in fields {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(format!("{field:?} is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("non-finite feature value {v}")));
                }
                row.push(v);
            }
            match dim {
                None if row.is_empty() => {
                    return Err(parse_err("frame record has no feature values".into()))
                }
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(parse_err(format!(
                        "frame {frame} has {} values, expected {d}",
                        row.len()
                    )))
                }
                Some(_) => {}
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                context: context.to_string(),
                line: 0,
                reason: "no feature records".into(),
            });
        }
        FeatureTable::from_rows(rows)
    }

    /// Serialize in the file format; `load` reads the result back
    /// bit-exactly.
    pub fn write_to<W: Write>(&self, writer: &mut W) -> Result<()> {
        for t in 1..=self.frames() {
            let row: Vec<String> = self.frame(t).iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{t} {}", row.join(" ")).map_err(|source| Error::Io {
                context: "feature writer".into(),
                source,
            })?;
        }
        Ok(())
    }
}

/// Seeded random features for fixtures, demos, and benchmarks.
pub fn random_features(frames: usize, dim: usize, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..frames)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    FeatureTable::from_rows(rows).expect("generated rows are consistent")
}
