//! Binary checkpoint format.
//!
//! ```text
//! "VLXM" | version u32
//! config: image_side u32 | patch_size u32 | vision_hidden u32 | text_hidden u32
//!         | embed_dim u32 | init_temperature f64 | seed u64
//!         | vocab_len u32 | (len u32, utf-8 bytes) × vocab_len
//! params: count u32 | (ndim u32, dims u32 × ndim, f64 × numel) × count
//! tau f64
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use super::{DualEncoderModel, ModelConfig, Vocab};
use crate::error::{Result, VlxError};
use crate::io::{ByteReader, ByteWriter};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VLXM";
pub const CHECKPOINT_VERSION: u32 = 1;

impl DualEncoderModel {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut w = ByteWriter::new();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        for v in [
            c.image_side,
            c.patch_size,
            c.vision_hidden,
            c.text_hidden,
            c.embed_dim,
        ] {
            w.u32(v as u32);
        }
        w.f64(c.init_temperature);
        w.u64(c.seed);
        w.u32(c.vocab.len() as u32);
        for t in c.vocab.tokens() {
            w.string(t);
        }
        w.u32(self.params.len() as u32);
        for p in &self.params {
            w.u32(p.shape().len() as u32);
            for &d in p.shape() {
                w.u32(d as u32);
            }
            w.f64s(p.data());
        }
        w.f64(self.tau.item());
        w.into_inner()
    }

    pub fn from_checkpoint_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let mut r = ByteReader::new(bytes, origin);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(VlxError::format(origin, "not a VLXM checkpoint"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(VlxError::format(
                origin,
                format!("unsupported checkpoint version {version}"),
            ));
        }
        let mut dims = [0usize; 5];
        for d in dims.iter_mut() {
            *d = r.u32()? as usize;
        }
        let init_temperature = r.f64()?;
        let seed = r.u64()?;
        let vocab_len = r.u32()? as usize;
        let tokens = (0..vocab_len)
            .map(|_| r.string())
            .collect::<Result<Vec<_>>>()?;
        let config = ModelConfig {
            image_side: dims[0],
            patch_size: dims[1],
            vision_hidden: dims[2],
            text_hidden: dims[3],
            embed_dim: dims[4],
            vocab: Vocab::new(tokens)?,
            init_temperature,
            seed,
        };
        let count = r.u32()? as usize;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = shape.iter().product();
            let data = r.f64s(numel)?;
            params.push(Tensor::new(shape, data)?);
        }
        let tau = Tensor::new(vec![], vec![r.f64()?])?;
        r.finish()?;
        DualEncoderModel::from_parts(config, params, tau)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_checkpoint_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| VlxError::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes, &path.display().to_string())
    }
}
