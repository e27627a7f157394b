use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use sha2::{Digest, Sha256};

use super::{per_dimension_maps, MapStack};
use crate::attribution::Method;
use crate::error::Result;
use crate::model::{DualEncoderModel, Fingerprint, ImageInput};

/// Overrides the on-disk cache location.
pub const CACHE_DIR_ENV: &str = "VLX_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheOutcome {
    Memory,
    Disk,
    Built,
}

impl CacheOutcome {
    pub fn is_hit(self) -> bool {
        self != CacheOutcome::Built
    }
}

/// Map stacks keyed by image, method and model, kept in memory and
/// optionally mirrored to a directory.
#[derive(Debug, Default)]
pub struct StackCache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<String, Arc<MapStack>>>,
    hits: AtomicUsize,
    builds: AtomicUsize,
}

impl StackCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    /// Uses `$VLX_CACHE_DIR` when set, else `default_dir`.
    pub fn from_env(default_dir: &Path) -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::with_dir(PathBuf::from(d)),
            _ => Self::with_dir(default_dir),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn key(image_id: &str, method: &Method, fingerprint: &Fingerprint) -> String {
        let mut h = Sha256::new();
        for part in [image_id, &method.descriptor(), &fingerprint.to_string()] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn builds(&self) -> usize {
        self.builds.load(Ordering::Relaxed)
    }

    pub fn get_or_build(
        &self,
        model: &DualEncoderModel,
        img: &ImageInput,
        method: &Method,
    ) -> Result<(Arc<MapStack>, CacheOutcome)> {
        let image_id = img.id();
        let fingerprint = model.fingerprint();
        let key = Self::key(&image_id, method, &fingerprint);
        if let Some(stack) = self.memory.read().expect("cache lock").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok((stack.clone(), CacheOutcome::Memory));
        }
        let path = self.dir.as_ref().map(|d| d.join(format!("{key}.vlxs")));
        if let Some(path) = &path {
            // Unreadable or mismatched files are rebuilt and overwritten.
            if let Ok(stack) = MapStack::load(path) {
                if stack.image_id == image_id
                    && stack.fingerprint == fingerprint
                    && &stack.method == method
                {
                    let stack = Arc::new(stack);
                    self.insert(key, stack.clone());
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return Ok((stack, CacheOutcome::Disk));
                }
            }
        }
        let stack = Arc::new(per_dimension_maps(model, img, method)?);
        self.builds.fetch_add(1, Ordering::Relaxed);
        if let Some(path) = &path {
            stack.save(path)?;
        }
        self.insert(key, stack.clone());
        Ok((stack, CacheOutcome::Built))
    }

    fn insert(&self, key: String, stack: Arc<MapStack>) {
        self.memory.write().expect("cache lock").insert(key, stack);
    }
}
