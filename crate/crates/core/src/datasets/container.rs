//! Binary pool container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic    8 bytes  "FOCALPL\0"
//! version  u32      = 1
//! classes  u32
//! height   u32      sample rows (1 for feature points)
//! width    u32      sample columns (point dimension for feature points)
//! counts   4 × u32  train, pool, val, test
//! items    repeated in id order:
//!          id u32, label u32, perturbation u8, split u8, values f64 × height·width
//! ```
//!
//! Perturbation codes: 0 none, 1 black dots, 2 blur, 3 merged.
//! Split codes: 0 train, 1 pool, 2 val, 3 test. Bit 7 of the split byte is
//! set for images (`[height, width]` tensors); it is clear for feature
//! points, which are stored with `height = 1` and reload as `[width]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Census, Item, LabeledPool, Perturbation, Split};
use crate::codec::Reader;
use crate::error::{Error, Result};
use crate::Tensor;

pub const POOL_MAGIC: &[u8; 8] = b"FOCALPL\0";
pub const POOL_FORMAT_VERSION: u32 = 1;

/// JSON sidecar written next to a pool container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolManifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub census: Census,
}

impl PoolManifest {
    pub fn new(seed: u64, config: BTreeMap<String, String>, pool: &LabeledPool) -> Self {
        Self {
            format: "focal-pool".into(),
            version: POOL_FORMAT_VERSION,
            seed,
            config,
            census: pool.census(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn encode_pool(pool: &LabeledPool) -> Vec<u8> {
    let shape = pool.sample_shape();
    let (h, w) = match shape.as_slice() {
        [h, w] => (*h, *w),
        [d] => (1, *d),
        _ => (0, 0),
    };
    let mut out = Vec::new();
    out.extend_from_slice(POOL_MAGIC);
    out.extend_from_slice(&POOL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(pool.classes() as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for s in Split::ALL {
        out.extend_from_slice(&(pool.count(s) as u32).to_le_bytes());
    }
    for it in pool.items() {
        out.extend_from_slice(&it.id.to_le_bytes());
        out.extend_from_slice(&(it.ground_truth() as u32).to_le_bytes());
        out.push(it.perturbation.code());
        out.push(it.split.code() | if it.is_image() { 0x80 } else { 0 });
        for v in it.pixels.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pool(bytes: &[u8]) -> Result<LabeledPool> {
    let mut r = Reader::new(bytes, "pool container");
    r.magic(POOL_MAGIC)?;
    let version = r.u32()?;
    if version != POOL_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported pool version {version}")));
    }
    let classes = r.u32()? as usize;
    let (h, w) = (r.u32()? as usize, r.u32()? as usize);
    let mut counts = [0usize; 4];
    for c in &mut counts {
        *c = r.u32()? as usize;
    }
    let total: usize = counts.iter().sum();
    let mut items = Vec::with_capacity(total.min(bytes.len() / 10));
    for _ in 0..total {
        let id = r.u32()?;
        let label = r.u32()? as usize;
        let pert = Perturbation::from_code(r.u8()?)
            .ok_or_else(|| Error::Format("bad perturbation code".into()))?;
        let split_byte = r.u8()?;
        let split = Split::from_code(split_byte & 0x7f)
            .ok_or_else(|| Error::Format("bad split code".into()))?;
        let data = (0..h * w).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let pixels = if split_byte & 0x80 != 0 {
            Tensor::matrix(h, w, data)?
        } else {
            Tensor::vector(data)
        };
        let mut it = Item::new(id, pixels, label);
        it.perturbation = pert;
        it.split = split;
        items.push(it);
    }
    r.finish()?;
    let pool = LabeledPool::new(items, classes)?;
    for (s, &n) in Split::ALL.iter().zip(&counts) {
        if pool.count(*s) != n {
            return Err(Error::Format("split counts disagree with header".into()));
        }
    }
    Ok(pool)
}

pub fn write_pool(path: &Path, pool: &LabeledPool) -> Result<()> {
    fs::write(path, encode_pool(pool))?;
    Ok(())
}

pub fn read_pool(path: &Path) -> Result<LabeledPool> {
    decode_pool(&fs::read(path)?)
}
