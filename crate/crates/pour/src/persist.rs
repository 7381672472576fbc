//! Binary checkpoint container for frames, feature matrices, and models.
//!
//! Layout: magic "POUR1", one type-tag byte, a type-specific shape header,
//! little-endian f64 payload in row-major order, and a trailing 64-bit
//! FNV-1a checksum over everything after the magic. Round trips are
//! bit-exact.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{PourError, Result};
use crate::geometry::EtfFrame;
use crate::model::{Activation, Layer, ToyModel};
use crate::synthetic::FeatureMatrix;

const MAGIC: &[u8; 5] = b"POUR1";

const TAG_FRAME: u8 = 1;
const TAG_FEATURES: u8 = 2;
const TAG_MODEL: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Frame(EtfFrame),
    Features(FeatureMatrix),
    Model(ToyModel),
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Writer {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn matrix(&mut self, m: &Array2<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for &v in m.iter() {
            self.f64(v);
        }
    }

    fn vector(&mut self, v: &Array1<f64>) {
        self.u64(v.len() as u64);
        for &x in v.iter() {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(PourError::Checkpoint("truncated payload".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<Array2<f64>> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        if rows.checked_mul(cols).map_or(true, |n| n > 1 << 28) {
            return Err(PourError::Checkpoint("implausible matrix shape".into()));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| PourError::Checkpoint(e.to_string()))
    }

    fn vector(&mut self) -> Result<Array1<f64>> {
        let len = self.u64()? as usize;
        if len > 1 << 28 {
            return Err(PourError::Checkpoint("implausible vector length".into()));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(self.f64()?);
        }
        Ok(Array1::from_vec(data))
    }
}

fn encode(checkpoint: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::new();
    match checkpoint {
        Checkpoint::Frame(frame) => {
            w.u8(TAG_FRAME);
            w.matrix(&frame.as_matrix());
        }
        Checkpoint::Features(features) => {
            w.u8(TAG_FEATURES);
            w.u64(features.class_count as u64);
            w.matrix(&features.rows);
            w.u64(features.labels.len() as u64);
            for &l in &features.labels {
                w.u64(l as u64);
            }
        }
        Checkpoint::Model(model) => {
            w.u8(TAG_MODEL);
            w.u64(model.class_count as u64);
            w.u64(model.layers.len() as u64);
            for layer in &model.layers {
                w.u8(match layer.activation {
                    Activation::Linear => 0,
                    Activation::Tanh => 1,
                });
                w.matrix(&layer.weight);
                w.vector(&layer.bias);
            }
            w.matrix(&model.head);
        }
    }
    let checksum = fnv1a(&w.buf);
    let mut out = Vec::with_capacity(MAGIC.len() + w.buf.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&w.buf);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 1 + 8 {
        return Err(PourError::Checkpoint("file too short".into()));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(PourError::Checkpoint("bad magic, not a POUR1 file".into()));
    }
    let body = &bytes[MAGIC.len()..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let computed = fnv1a(body);
    if stored != computed {
        return Err(PourError::Checkpoint(format!(
            "checksum mismatch: stored {stored:#018x}, computed {computed:#018x}"
        )));
    }
    let mut r = Reader { bytes: body, pos: 0 };
    let tag = r.u8()?;
    let checkpoint = match tag {
        TAG_FRAME => {
            let matrix = r.matrix()?;
            let directions = matrix.rows().into_iter().map(|row| row.to_owned()).collect();
            Checkpoint::Frame(EtfFrame::from_directions(directions)?)
        }
        TAG_FEATURES => {
            let class_count = r.u64()? as usize;
            let rows = r.matrix()?;
            let n = r.u64()? as usize;
            if n != rows.nrows() {
                return Err(PourError::Checkpoint(format!(
                    "label count {n} does not match {} rows",
                    rows.nrows()
                )));
            }
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                labels.push(r.u64()? as usize);
            }
            Checkpoint::Features(FeatureMatrix::new(rows, labels, class_count)?)
        }
        TAG_MODEL => {
            let class_count = r.u64()? as usize;
            let layer_count = r.u64()? as usize;
            if layer_count > 1024 {
                return Err(PourError::Checkpoint("implausible layer count".into()));
            }
            let mut layers = Vec::with_capacity(layer_count);
            for _ in 0..layer_count {
                let activation = match r.u8()? {
                    0 => Activation::Linear,
                    1 => Activation::Tanh,
                    other => {
                        return Err(PourError::Checkpoint(format!(
                            "unknown activation tag {other}"
                        )))
                    }
                };
                let weight = r.matrix()?;
                let bias = r.vector()?;
                layers.push(Layer {
                    weight,
                    bias,
                    activation,
                });
            }
            let head = r.matrix()?;
            Checkpoint::Model(ToyModel::from_parts(layers, head, class_count)?)
        }
        other => {
            return Err(PourError::Checkpoint(format!("unknown type tag {other}")));
        }
    };
    if r.pos != r.bytes.len() {
        return Err(PourError::Checkpoint("trailing bytes after payload".into()));
    }
    Ok(checkpoint)
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode(checkpoint))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode(&fs::read(path)?)
}

pub fn load_frame(path: &Path) -> Result<EtfFrame> {
    match load_checkpoint(path)? {
        Checkpoint::Frame(frame) => Ok(frame),
        other => Err(PourError::Checkpoint(format!(
            "expected a frame checkpoint, found {}",
            tag_name(&other)
        ))),
    }
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    match load_checkpoint(path)? {
        Checkpoint::Features(features) => Ok(features),
        other => Err(PourError::Checkpoint(format!(
            "expected a features checkpoint, found {}",
            tag_name(&other)
        ))),
    }
}

pub fn load_model(path: &Path) -> Result<ToyModel> {
    match load_checkpoint(path)? {
        Checkpoint::Model(model) => Ok(model),
        other => Err(PourError::Checkpoint(format!(
            "expected a model checkpoint, found {}",
            tag_name(&other)
        ))),
    }
}

fn tag_name(checkpoint: &Checkpoint) -> &'static str {
    match checkpoint {
        Checkpoint::Frame(_) => "frame",
        Checkpoint::Features(_) => "features",
        Checkpoint::Model(_) => "model",
    }
}
