//! Plain-text checkpoints.
//!
//! ```text
//! # continuum checkpoint v1
//! preset=synthetic
//! d_x=256
//! ...
//! [encoder.0.weight] 128x256 leaky_relu
//! <128 CSV rows of 256 reals>
//! [encoder.0.bias] 1x128 leaky_relu
//! <1 CSV row>
//! ```
//!
//! Reals use 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::{BandwidthPolicy, TrainingConfig, WaeParams};
use crate::autodiff::{Activation, Layer, MlpParams};
use crate::table::fmt_real;

const MAGIC: &str = "# continuum checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("checkpoint line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn join_dims(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn render_checkpoint(config: &TrainingConfig, params: &WaeParams) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("write to string");
    kv("preset", config.preset.clone());
    kv("d_x", params.d_x().to_string());
    kv("d_z", params.d_z().to_string());
    kv("encoder_hidden", join_dims(&config.encoder_hidden));
    kv("decoder_hidden", join_dims(&config.decoder_hidden));
    kv("batch_size", config.batch_size.to_string());
    kv("steps", config.steps.to_string());
    kv("lambda_mmd", fmt_real(config.lambda_mmd));
    kv("lambda_ind", fmt_real(config.lambda_ind));
    kv("lambda_dep", fmt_real(config.lambda_dep));
    kv("learning_rate", fmt_real(config.learning_rate));
    kv("seed", config.seed.to_string());
    kv("bandwidth", config.bandwidth.label());
    let mut out = format!("{MAGIC}\n{out}");
    for (prefix, net) in [("encoder", &params.encoder), ("decoder", &params.decoder)] {
        for (i, layer) in net.layers.iter().enumerate() {
            let act = layer.activation.name();
            let (r, c) = layer.weight.dim();
            writeln!(out, "[{prefix}.{i}.weight] {r}x{c} {act}").unwrap();
            for row in layer.weight.rows() {
                push_row(&mut out, row.iter());
            }
            writeln!(out, "[{prefix}.{i}.bias] 1x{} {act}", layer.bias.len()).unwrap();
            push_row(&mut out, layer.bias.iter());
        }
    }
    out
}

fn push_row<'a>(out: &mut String, vals: impl Iterator<Item = &'a f64>) {
    let cells: Vec<String> = vals.map(|&v| fmt_real(v)).collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub fn write_checkpoint(path: &Path, config: &TrainingConfig, params: &WaeParams) -> Result<(), CheckpointError> {
    fs::write(path, render_checkpoint(config, params)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<(TrainingConfig, WaeParams), CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_checkpoint(&text)
}

struct Block {
    net: String,
    index: usize,
    kind: String,
    rows: usize,
    cols: usize,
    activation: Activation,
    values: Vec<f64>,
}

pub fn parse_checkpoint(text: &str) -> Result<(TrainingConfig, WaeParams), CheckpointError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let err = |line: usize, msg: String| CheckpointError::Parse { line, msg };
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(err(1, format!("missing {MAGIC:?} header"))),
    }

    let mut header = std::collections::HashMap::new();
    let mut blocks: Vec<Block> = Vec::new();
    for (line, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let (name, tail) = rest
                .split_once(']')
                .ok_or_else(|| err(line, "unterminated block name".into()))?;
            let mut parts = name.split('.');
            let (Some(net), Some(idx), Some(kind), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(err(line, format!("bad block name {name:?}")));
            };
            let mut tail = tail.split_whitespace();
            let (Some(shape), Some(act)) = (tail.next(), tail.next()) else {
                return Err(err(line, "block needs shape and activation".into()));
            };
            let (r, c) = shape
                .split_once('x')
                .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
                .ok_or_else(|| err(line, format!("bad shape {shape:?}")))?;
            blocks.push(Block {
                net: net.to_string(),
                index: idx.parse().map_err(|_| err(line, format!("bad layer index {idx:?}")))?,
                kind: kind.to_string(),
                rows: r,
                cols: c,
                activation: Activation::from_name(act).ok_or_else(|| err(line, format!("unknown activation {act:?}")))?,
                values: Vec::with_capacity(r * c),
            });
        } else if let Some(block) = blocks.last_mut() {
            let before = block.values.len();
            for cell in l.split(',') {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| err(line, format!("cannot parse {cell:?} as a number")))?;
                block.values.push(v);
            }
            if block.values.len() - before != block.cols {
                return Err(err(
                    line,
                    format!("expected {} values, found {}", block.cols, block.values.len() - before),
                ));
            }
        } else {
            let (k, v) = l.split_once('=').ok_or_else(|| err(line, format!("expected key=value, got {l:?}")))?;
            header.insert(k.trim().to_string(), (line, v.trim().to_string()));
        }
    }

    let get = |k: &str| header.get(k).ok_or_else(|| err(0, format!("missing header key {k:?}")));
    fn num<T: std::str::FromStr>(e: &dyn Fn(usize, String) -> CheckpointError, (line, v): &(usize, String)) -> Result<T, CheckpointError> {
        v.parse().map_err(|_| e(*line, format!("bad value {v:?}")))
    }
    let dims = |(line, v): &(usize, String)| -> Result<Vec<usize>, CheckpointError> {
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|d| d.parse().map_err(|_| err(*line, format!("bad dims {v:?}"))))
            .collect()
    };
    let bw = get("bandwidth")?;
    let config = TrainingConfig {
        preset: get("preset")?.1.clone(),
        d_z: num(&err, get("d_z")?)?,
        encoder_hidden: dims(get("encoder_hidden")?)?,
        decoder_hidden: dims(get("decoder_hidden")?)?,
        batch_size: num(&err, get("batch_size")?)?,
        steps: num(&err, get("steps")?)?,
        lambda_mmd: num(&err, get("lambda_mmd")?)?,
        lambda_ind: num(&err, get("lambda_ind")?)?,
        lambda_dep: num(&err, get("lambda_dep")?)?,
        learning_rate: num(&err, get("learning_rate")?)?,
        seed: num(&err, get("seed")?)?,
        bandwidth: BandwidthPolicy::parse(&bw.1).ok_or_else(|| err(bw.0, format!("bad bandwidth {:?}", bw.1)))?,
    };

    let mut nets = [MlpParams { layers: Vec::new() }, MlpParams { layers: Vec::new() }];
    let mut pending: Option<(Array2<f64>, Activation)> = None;
    for b in blocks {
        let slot = match b.net.as_str() {
            "encoder" => 0,
            "decoder" => 1,
            other => return Err(err(0, format!("unknown network {other:?}"))),
        };
        if b.values.len() != b.rows * b.cols {
            return Err(err(0, format!("block {}.{}.{} is truncated", b.net, b.index, b.kind)));
        }
        let expected = nets[slot].layers.len();
        if b.index != expected {
            return Err(err(0, format!("{}: expected layer {expected}, found {}", b.net, b.index)));
        }
        match (b.kind.as_str(), pending.take()) {
            ("weight", None) => {
                let w = Array2::from_shape_vec((b.rows, b.cols), b.values).expect("size checked");
                pending = Some((w, b.activation));
            }
            ("bias", Some((weight, activation))) if b.rows == 1 && activation == b.activation => {
                nets[slot].layers.push(Layer {
                    weight,
                    bias: Array1::from(b.values),
                    activation,
                });
            }
            _ => return Err(err(0, format!("unexpected block {}.{}.{}", b.net, b.index, b.kind))),
        }
    }
    if pending.is_some() {
        return Err(err(0, "weight block without bias".into()));
    }
    let [encoder, decoder] = nets;
    for net in [&encoder, &decoder] {
        net.validate().map_err(|e| err(0, e.to_string()))?;
    }
    let params = WaeParams { encoder, decoder };
    let d_x: usize = num(&err, get("d_x")?)?;
    if params.d_x() != d_x || params.d_z() != config.d_z || params.decoder.input_dim() != config.d_z {
        return Err(err(0, "layer shapes disagree with d_x / d_z header".into()));
    }
    Ok((config, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn round_trip_is_exact() {
        let cfg = TrainingConfig {
            encoder_hidden: vec![5, 4],
            decoder_hidden: vec![4],
            d_z: 3,
            bandwidth: BandwidthPolicy::Frozen(0.1),
            ..TrainingConfig::default()
        };
        let params = WaeParams::init(&cfg, 7, &mut seeded_rng(5, 0)).unwrap();
        let text = render_checkpoint(&cfg, &params);
        let (cfg2, params2) = parse_checkpoint(&text).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(params2, params);
        assert_eq!(render_checkpoint(&cfg2, &params2), text);
    }

    #[test]
    fn rejects_damage() {
        let cfg = TrainingConfig {
            encoder_hidden: vec![3],
            decoder_hidden: vec![3],
            d_z: 2,
            ..TrainingConfig::default()
        };
        let params = WaeParams::init(&cfg, 4, &mut seeded_rng(6, 0)).unwrap();
        let text = render_checkpoint(&cfg, &params);
        assert!(parse_checkpoint(&text.replacen(MAGIC, "# other", 1)).is_err());
        let truncated: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(parse_checkpoint(&truncated).is_err());
        assert!(parse_checkpoint(&text.replace("d_z=2", "d_z=5")).is_err());
    }
}
