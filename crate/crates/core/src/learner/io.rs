//! `BFMD` model files and the training-history CSV.
//!
//! Layout, all little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic | `b"BFMD"` |
//! | version | u32 = 1 |
//! | input beams, samples | 2 × u32 |
//! | filters, kernel rows, kernel cols, pool rows, pool cols | 5 × u32 |
//! | hidden layers, hidden width | 2 × u32 |
//! | dropout rate | f64 |
//! | input mode (0 binary, 1 float), normalization (0 global, 1 per-row) | 2 × u8 |
//! | detection threshold, ceiling (dBm) | 2 × f64 |
//! | label center x y, half extent x y | 4 × f64 |
//! | tensor count | u32 |
//!
//! then each tensor as `u32 length` followed by that many f32 values. Tensor
//! order is conv weights (filter, kernel row, kernel col), conv biases, then
//! weights (input-major) and biases of every dense layer.
//!
//! Optimizer moments and the history are not stored.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use super::network::{ConvSpec, Dense, Network, NetworkSpec, Params};
use super::train::{EpochRecord, Model};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::pipeline::{put_f32, InputMode, LabelScaler, Normalization, PreprocessConfig, Reader};

pub const MODEL_MAGIC: &[u8; 4] = b"BFMD";
pub const MODEL_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn save_model(model: &Model) -> Vec<u8> {
    let spec = model.network.spec();
    let (beams, samples) = model.network.input_dims();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [
        beams,
        samples,
        spec.conv.filters,
        spec.conv.kernel.0,
        spec.conv.kernel.1,
        spec.conv.pool.0,
        spec.conv.pool.1,
        spec.hidden_layers,
        spec.hidden_width,
    ] {
        put_u32(&mut out, v);
    }
    put_f64(&mut out, spec.dropout_rate);
    let p = &model.preprocess;
    out.push(match p.mode {
        InputMode::Binary => 0,
        InputMode::Float => 1,
    });
    out.push(match p.normalization {
        Normalization::Global => 0,
        Normalization::PerRow => 1,
    });
    put_f64(&mut out, p.detection_threshold);
    put_f64(&mut out, p.ceiling);
    let s = &model.scaler;
    for v in [s.center.x, s.center.y, s.half_extent.x, s.half_extent.y] {
        put_f64(&mut out, v);
    }
    let tensors = model.network.params().tensors();
    put_u32(&mut out, tensors.len());
    for t in tensors {
        put_u32(&mut out, t.len());
        for &v in t {
            put_f32(&mut out, v);
        }
    }
    out
}

pub fn load_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader::new(bytes, "model");
    let magic = r.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(Error::Format(format!(
            "bad model magic {magic:?}, expected \"BFMD\""
        )));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            kind: "model",
            found: version,
            supported: MODEL_VERSION,
        });
    }
    let mut h = [0usize; 9];
    for v in &mut h {
        *v = r.u32()? as usize;
    }
    let spec = NetworkSpec {
        conv: ConvSpec {
            filters: h[2],
            kernel: (h[3], h[4]),
            pool: (h[5], h[6]),
        },
        hidden_layers: h[7],
        hidden_width: h[8],
        dropout_rate: r.f64()?,
    };
    let mode = match r.u8()? {
        0 => InputMode::Binary,
        1 => InputMode::Float,
        m => return Err(Error::Format(format!("unknown input mode {m}"))),
    };
    let normalization = match r.u8()? {
        0 => Normalization::Global,
        1 => Normalization::PerRow,
        m => return Err(Error::Format(format!("unknown normalization {m}"))),
    };
    let preprocess = PreprocessConfig {
        mode,
        normalization,
        detection_threshold: r.f64()?,
        ceiling: r.f64()?,
    };
    let scaler = LabelScaler {
        center: Point2::new(r.f64()?, r.f64()?),
        half_extent: Point2::new(r.f64()?, r.f64()?),
    };
    let template =
        Network::<f32>::zeros(spec, (h[0], h[1])).map_err(|e| Error::Format(e.to_string()))?;
    let expected = template.params().tensors().len();
    let count = r.u32()? as usize;
    if count != expected {
        return Err(Error::DimensionMismatch {
            expected: format!("{expected} tensors"),
            found: format!("{count}"),
        });
    }
    let mut tensors = Vec::with_capacity(count);
    for want in template.params().tensors().iter().map(|t| t.len()) {
        let len = r.u32()? as usize;
        if len != want {
            return Err(Error::DimensionMismatch {
                expected: format!("tensor of {want} values"),
                found: format!("{len}"),
            });
        }
        tensors.push((0..len).map(|_| r.f32()).collect::<Result<Vec<f32>>>()?);
    }
    r.finish()?;
    let tp = template.params();
    let mut it = tensors.into_iter();
    let conv_weights =
        Array2::from_shape_vec(tp.conv_weights.raw_dim(), it.next().unwrap()).unwrap();
    let conv_bias = Array1::from(it.next().unwrap());
    let dense = tp
        .dense
        .iter()
        .map(|d| Dense {
            weights: Array2::from_shape_vec(d.weights.raw_dim(), it.next().unwrap()).unwrap(),
            bias: Array1::from(it.next().unwrap()),
        })
        .collect();
    let network = Network::from_params(
        spec,
        (h[0], h[1]),
        Params {
            conv_weights,
            conv_bias,
            dense,
        },
    )?;
    Ok(Model {
        network,
        scaler,
        preprocess,
        history: Vec::new(),
    })
}

pub const HISTORY_CSV_HEADER: &str = "epoch,learning_rate,mean_loss";

pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(HISTORY_CSV_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(out, "{},{:e},{:e}", r.epoch, r.learning_rate, r.mean_loss);
    }
    out
}
