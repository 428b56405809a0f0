//! Model checkpoint and feature-matrix containers.
//!
//! Checkpoint, little-endian:
//!
//! ```text
//! magic     8 bytes  "FOCALMD\0"
//! version   u32      = 1
//! seed      u64
//! input     u8 kind (0 image, 1 vector), u32 height, u32 width (vector: 1, d)
//! sizes     u32 × 7  classes, feature_dim, hidden_width, conv_filters,
//!                    conv_kernel, pool, extractor_hidden
//! init      f64 × 2  init_sigma, init_mu_std
//! tensors   u32 count, then per tensor: u32 rank, u32 × rank extents,
//!           f64 × product(extents)
//! ```
//!
//! Tensors follow the model's binding order, so head layers appear as
//! `μ_w, ρ_w, μ_b, ρ_b`.
//!
//! Feature matrix:
//!
//! ```text
//! magic    8 bytes  "FOCALFT\0"
//! version  u32      = 1
//! rows     u64
//! cols     u32
//! rows ×   id u32, f64 × cols
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InputShape, ModelSpec, VariationalClassifier};
use crate::codec::Reader;
use crate::datasets::Item;
use crate::error::{Error, Result};
use crate::ndcalc::Tensor;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FOCALMD\0";
pub const FEATURE_MAGIC: &[u8; 8] = b"FOCALFT\0";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_checkpoint<S: Scalar>(model: &VariationalClassifier<S>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.seed.to_le_bytes());
    let spec = &model.spec;
    match spec.input {
        InputShape::Image { height, width } => {
            out.push(0);
            put_u32(&mut out, height);
            put_u32(&mut out, width);
        }
        InputShape::Vector(d) => {
            out.push(1);
            put_u32(&mut out, 1);
            put_u32(&mut out, d);
        }
    }
    for v in [
        spec.classes,
        spec.feature_dim,
        spec.hidden_width,
        spec.conv_filters,
        spec.conv_kernel,
        spec.pool,
        spec.extractor_hidden,
    ] {
        put_u32(&mut out, v);
    }
    out.extend_from_slice(&spec.init_sigma.to_le_bytes());
    out.extend_from_slice(&spec.init_mu_std.to_le_bytes());
    let params = model.params();
    put_u32(&mut out, params.len());
    for t in params {
        put_u32(&mut out, t.shape().len());
        for &e in t.shape() {
            put_u32(&mut out, e);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint<S: Scalar>(bytes: &[u8]) -> Result<VariationalClassifier<S>> {
    let mut r = Reader::new(bytes, "model checkpoint");
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let seed = r.u64()?;
    let kind = r.u8()?;
    let (h, w) = (r.u32()? as usize, r.u32()? as usize);
    let input = match kind {
        0 => InputShape::Image { height: h, width: w },
        1 => InputShape::Vector(w),
        k => return Err(Error::Format(format!("unknown input kind {k}"))),
    };
    let mut sizes = [0usize; 7];
    for s in &mut sizes {
        *s = r.u32()? as usize;
    }
    let spec = ModelSpec {
        input,
        classes: sizes[0],
        feature_dim: sizes[1],
        hidden_width: sizes[2],
        conv_filters: sizes[3],
        conv_kernel: sizes[4],
        pool: sizes[5],
        extractor_hidden: sizes[6],
        init_sigma: r.f64()?,
        init_mu_std: r.f64()?,
    };
    let mut model = VariationalClassifier::new(spec, seed).map_err(|e| Error::Format(e.to_string()))?;
    let count = r.u32()? as usize;
    let mut params = model.params_mut();
    if count != params.len() {
        return Err(Error::Format(format!("checkpoint has {count} tensors, model needs {}", params.len())));
    }
    for p in params.iter_mut() {
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        if shape != p.shape() {
            return Err(Error::Format(format!("tensor shape {shape:?} != {:?}", p.shape())));
        }
        for v in p.data_mut() {
            *v = S::lit(r.f64()?);
        }
    }
    r.finish()?;
    Ok(model)
}

pub fn write_checkpoint<S: Scalar>(path: &Path, model: &VariationalClassifier<S>) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn read_checkpoint<S: Scalar>(path: &Path) -> Result<VariationalClassifier<S>> {
    decode_checkpoint(&fs::read(path)?)
}

/// Feature rows keyed by item id.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<S> {
    pub ids: Vec<u32>,
    pub features: Tensor<S>,
}

/// JSON sidecar for a feature container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub format: String,
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub model_seed: u64,
}

impl<S: Scalar> VariationalClassifier<S> {
    /// Features for `items` in ascending id order.
    pub fn export_features(&self, items: &[&Item]) -> Result<FeatureMatrix<S>> {
        let mut sorted: Vec<&Item> = items.to_vec();
        sorted.sort_by_key(|it| it.id);
        let d = self.spec.input.len();
        let mut data = Vec::with_capacity(sorted.len() * d);
        for it in &sorted {
            if it.pixels.len() != d {
                return Err(Error::Dimension(format!("item {} has {} values, model takes {d}", it.id, it.pixels.len())));
            }
            data.extend(it.pixels.data().iter().map(|&v| S::lit(v)));
        }
        let x = Tensor::matrix(sorted.len(), d, data)?;
        Ok(FeatureMatrix {
            ids: sorted.iter().map(|it| it.id).collect(),
            features: self.features(&x)?,
        })
    }
}

pub fn encode_features<S: Scalar>(m: &FeatureMatrix<S>) -> Vec<u8> {
    let cols = m.features.cols();
    let mut out = Vec::with_capacity(24 + m.ids.len() * (4 + 8 * cols));
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.ids.len() as u64).to_le_bytes());
    put_u32(&mut out, cols);
    for (i, id) in m.ids.iter().enumerate() {
        out.extend_from_slice(&id.to_le_bytes());
        for v in m.features.row(i) {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

pub fn decode_features<S: Scalar>(bytes: &[u8]) -> Result<FeatureMatrix<S>> {
    let mut r = Reader::new(bytes, "feature container");
    r.magic(FEATURE_MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported feature container version {version}")));
    }
    let rows = r.u64()? as usize;
    let cols = r.u32()? as usize;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for _ in 0..rows {
        ids.push(r.u32()?);
        for _ in 0..cols {
            data.push(S::lit(r.f64()?));
        }
    }
    r.finish()?;
    Ok(FeatureMatrix {
        ids,
        features: Tensor::matrix(rows, cols, data)?,
    })
}

/// Writes the container and a `<path>.json` manifest next to it.
pub fn write_features<S: Scalar>(path: &Path, m: &FeatureMatrix<S>, model_seed: u64) -> Result<()> {
    fs::write(path, encode_features(m))?;
    let manifest = FeatureManifest {
        format: "focal-features".into(),
        version: VERSION,
        rows: m.ids.len(),
        cols: m.features.cols(),
        model_seed,
    };
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    fs::write(sidecar, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn read_features<S: Scalar>(path: &Path) -> Result<FeatureMatrix<S>> {
    decode_features(&fs::read(path)?)
}
