//! Binary map-stack format.
//!
//! ```text
//! "VLXS" | version u32 | M u32 | A u32
//! method name (len u32, utf-8) | params JSON (len u32, utf-8)
//! image id (len u32, utf-8) | model fingerprint [u8; 32]
//! f64 × M·A·A, map-major then row-major
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use super::MapStack;
use crate::attribution::{Grid, Method};
use crate::error::{Result, VlxError};
use crate::io::{write_atomic, ByteReader, ByteWriter};
use crate::model::Fingerprint;

pub const STACK_MAGIC: &[u8; 4] = b"VLXS";
pub const STACK_VERSION: u32 = 1;

impl MapStack {
    pub fn to_bytes(&self) -> Vec<u8> {
        let a = self.side();
        let mut w = ByteWriter::new();
        w.bytes(STACK_MAGIC);
        w.u32(STACK_VERSION);
        w.u32(self.maps.len() as u32);
        w.u32(a as u32);
        w.string(self.method.name());
        w.string(&self.method.params_json().to_string());
        w.string(&self.image_id);
        w.bytes(&self.fingerprint.0);
        for map in &self.maps {
            w.f64s(&map.values);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let mut r = ByteReader::new(bytes, origin);
        if r.take(4)? != STACK_MAGIC {
            return Err(VlxError::format(origin, "not a VLXS map stack"));
        }
        let version = r.u32()?;
        if version != STACK_VERSION {
            return Err(VlxError::format(
                origin,
                format!("unsupported stack version {version}"),
            ));
        }
        let m = r.u32()? as usize;
        let a = r.u32()? as usize;
        if m == 0 || a == 0 {
            return Err(VlxError::format(origin, "empty map stack"));
        }
        let name = r.string()?;
        let params: serde_json::Value = serde_json::from_str(&r.string()?)
            .map_err(|e| VlxError::format(origin, format!("bad params block: {e}")))?;
        let method = Method::from_name_and_params(&name, &params)?;
        let image_id = r.string()?;
        let fingerprint = Fingerprint(r.take(32)?.try_into().expect("32 bytes"));
        let mut maps = Vec::with_capacity(m);
        for _ in 0..m {
            let values = r.f64s(a * a)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(VlxError::format(origin, "non-finite map value"));
            }
            maps.push(Grid::from_values(a, a, values)?);
        }
        r.finish()?;
        Ok(Self {
            maps,
            method,
            image_id,
            fingerprint,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| VlxError::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}
