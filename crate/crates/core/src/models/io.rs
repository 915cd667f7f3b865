//! Versioned text format for trained networks. Every float is written as the
//! hex of its IEEE-754 bits so a round trip is bit-exact.
//!
//! ```text
//! riss-reg-predictor v1
//! layer_sizes 18 32 16 1
//! seed 42
//! impute_means <18 hex words>        (optional, all three or none)
//! standardize_mean <18 hex words>
//! standardize_std <18 hex words>
//! layer 0 weights <out*in hex words, row-major>
//! layer 0 bias <out hex words>
//! ...
//! ```

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use super::{Layer, Predictor};
use crate::cohort::{ImputeMeans, Preprocessor, StandardizeStats, N_FEATURES};
use crate::error::{Error, Result};

const MAGIC: &str = "riss-reg-predictor v1";

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub predictor: Predictor,
    pub preprocessing: Option<Preprocessor>,
}

fn hex_words<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values
        .map(|v| format!("{:016x}", v.to_bits()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_words(words: &[&str], line: usize) -> Result<Vec<f64>> {
    words
        .iter()
        .map(|w| {
            u64::from_str_radix(w, 16)
                .map(f64::from_bits)
                .map_err(|_| Error::Parse {
                    row: line,
                    column: "value".into(),
                    message: format!("`{w}` is not a 16-digit hex float"),
                })
        })
        .collect()
}

pub fn write_model<W: Write>(model: &SavedModel, mut w: W) -> Result<()> {
    let p = &model.predictor;
    writeln!(w, "{MAGIC}")?;
    let sizes: Vec<String> = p.layer_sizes().iter().map(usize::to_string).collect();
    writeln!(w, "layer_sizes {}", sizes.join(" "))?;
    writeln!(w, "seed {}", p.seed())?;
    if let Some(pre) = &model.preprocessing {
        writeln!(w, "impute_means {}", hex_words(pre.means.0.iter()))?;
        writeln!(w, "standardize_mean {}", hex_words(pre.stats.mean.iter()))?;
        writeln!(w, "standardize_std {}", hex_words(pre.stats.std.iter()))?;
    }
    for (i, l) in p.layers().iter().enumerate() {
        writeln!(w, "layer {i} weights {}", hex_words(l.weights.iter()))?;
        writeln!(w, "layer {i} bias {}", hex_words(l.bias.iter()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: BufRead>(r: R) -> Result<SavedModel> {
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    let bad = |row: usize, msg: &str| Error::Parse {
        row,
        column: "model".into(),
        message: msg.to_string(),
    };
    if lines.first().map(|l| l.trim()) != Some(MAGIC) {
        return Err(bad(1, "not a riss-reg predictor v1 file"));
    }
    let mut sizes: Option<Vec<usize>> = None;
    let mut seed = 0u64;
    let mut means = None;
    let mut smean = None;
    let mut sstd = None;
    let mut weights: Vec<Vec<f64>> = Vec::new();
    let mut biases: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(1) {
        let row = i + 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            [] => {}
            ["layer_sizes", rest @ ..] => {
                sizes = Some(
                    rest.iter()
                        .map(|s| s.parse::<usize>().map_err(|_| bad(row, "bad layer size")))
                        .collect::<Result<_>>()?,
                )
            }
            ["seed", s] => seed = s.parse().map_err(|_| bad(row, "bad seed"))?,
            ["impute_means", rest @ ..] => means = Some(parse_words(rest, row)?),
            ["standardize_mean", rest @ ..] => smean = Some(parse_words(rest, row)?),
            ["standardize_std", rest @ ..] => sstd = Some(parse_words(rest, row)?),
            ["layer", idx, kind, rest @ ..] => {
                let idx: usize = idx.parse().map_err(|_| bad(row, "bad layer index"))?;
                let target = match *kind {
                    "weights" => &mut weights,
                    "bias" => &mut biases,
                    _ => return Err(bad(row, "expected `weights` or `bias`")),
                };
                if idx != target.len() {
                    return Err(bad(row, "layers out of order"));
                }
                target.push(parse_words(rest, row)?);
            }
            _ => return Err(bad(row, "unrecognized line")),
        }
    }
    let sizes = sizes.ok_or_else(|| bad(2, "missing layer_sizes"))?;
    if sizes.len() < 2 || weights.len() != sizes.len() - 1 || biases.len() != weights.len() {
        return Err(bad(lines.len(), "layer count does not match layer_sizes"));
    }
    let mut layers = Vec::with_capacity(weights.len());
    for (k, (w, b)) in weights.into_iter().zip(biases).enumerate() {
        let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
        let weights = Array2::from_shape_vec((fan_out, fan_in), w)
            .map_err(|_| bad(lines.len(), &format!("layer {k} weights have the wrong length")))?;
        if b.len() != fan_out {
            return Err(bad(lines.len(), &format!("layer {k} bias has the wrong length")));
        }
        layers.push(Layer {
            weights,
            bias: Array1::from_vec(b),
        });
    }
    let predictor = Predictor::from_layers(layers, seed)?;
    let preprocessing = match (means, smean, sstd) {
        (None, None, None) => None,
        (Some(m), Some(a), Some(s)) if m.len() == N_FEATURES && a.len() == N_FEATURES && s.len() == N_FEATURES => {
            let arr = |v: Vec<f64>| -> [f64; N_FEATURES] { v.try_into().expect("length checked") };
            Some(Preprocessor {
                means: ImputeMeans(arr(m)),
                stats: StandardizeStats {
                    mean: arr(a),
                    std: arr(s),
                },
            })
        }
        _ => return Err(bad(lines.len(), "incomplete preprocessing statistics")),
    };
    Ok(SavedModel {
        predictor,
        preprocessing,
    })
}
