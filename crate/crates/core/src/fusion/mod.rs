//! Prompt-weighted fusion of per-embedding-dimension attribution maps.
//!
//! A [`MapStack`] holds one map per dimension of the normalized image
//! embedding. Fusing it with a text embedding `t` and temperature `τ` gives
//! `Σ_i τ·t[i]·map_i`, which for any of the attribution methods equals the
//! attribution of the similarity logit itself.

mod cache;
mod stack_file;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attribution::{
    attribute, attribute_all, AttributionMap, Grid, Method, ScalarTarget, VectorFunction,
    VisionEmbedding,
};
use crate::data::PromptSet;
use crate::error::{Result, VlxError};
use crate::io::write_atomic;
use crate::model::{DualEncoderModel, Fingerprint, ImageInput};
use crate::tensor::Tensor;

pub use cache::{CacheOutcome, StackCache, CACHE_DIR_ENV};
pub use stack_file::{STACK_MAGIC, STACK_VERSION};

/// Per-dimension maps of one image under one method.
#[derive(Clone, Debug, PartialEq)]
pub struct MapStack {
    pub maps: Vec<Grid>,
    pub method: Method,
    pub image_id: String,
    pub fingerprint: Fingerprint,
}

impl MapStack {
    pub fn embed_dim(&self) -> usize {
        self.maps.len()
    }

    pub fn side(&self) -> usize {
        self.maps.first().map_or(0, |g| g.rows)
    }

    /// Staleness check against the model about to be queried.
    pub fn check_model(&self, model: &DualEncoderModel) -> Result<()> {
        let current = model.fingerprint();
        if current != self.fingerprint {
            return Err(VlxError::Staleness {
                stack: self.fingerprint.to_string(),
                model: current.to_string(),
            });
        }
        Ok(())
    }
}

/// One map per output of `f`, with a non-finite map reported at its index.
pub fn per_dimension_grids<F: VectorFunction + ?Sized>(
    f: &F,
    input: &Tensor,
    method: &Method,
) -> Result<Vec<Grid>> {
    let maps = attribute_all(f, input, method)?;
    for (dim, map) in maps.iter().enumerate() {
        if map.values.iter().any(|v| !v.is_finite()) {
            return Err(VlxError::AtDimension {
                dim,
                source: Box::new(VlxError::NonFinite(format!("{} map", method.name()))),
            });
        }
    }
    Ok(maps)
}

pub fn per_dimension_maps(
    model: &DualEncoderModel,
    img: &ImageInput,
    method: &Method,
) -> Result<MapStack> {
    if img.side() != model.image_side() {
        return Err(VlxError::Dimension {
            op: "image side",
            lhs: vec![model.image_side()],
            rhs: vec![img.side()],
        });
    }
    let maps = per_dimension_grids(&VisionEmbedding::new(model), &img.to_tensor(), method)?;
    Ok(MapStack {
        maps,
        method: method.clone(),
        image_id: img.id(),
        fingerprint: model.fingerprint(),
    })
}

/// `Σ_i weights[i]·tau·maps[i]`, accumulated in ascending `i`.
pub fn fuse_grids(maps: &[Grid], weights: &[f64], tau: f64) -> Result<Grid> {
    if weights.len() != maps.len() {
        return Err(VlxError::Dimension {
            op: "fuse",
            lhs: vec![maps.len()],
            rhs: vec![weights.len()],
        });
    }
    let Some(first) = maps.first() else {
        return Err(VlxError::Input("empty map stack".into()));
    };
    let mut out = Grid::zeros(first.rows, first.cols);
    for (map, w) in maps.iter().zip(weights) {
        let c = tau * w;
        for (o, v) in out.values.iter_mut().zip(&map.values) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// A fused explanation for one prompt.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedMap {
    pub grid: Grid,
    pub prompt: String,
    pub text_embedding: Vec<f64>,
    pub tau: f64,
    pub method: Method,
    pub image_id: String,
    pub fingerprint: Fingerprint,
}

/// The JSON form of a [`FusedMap`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusedMapRecord {
    pub prompt: String,
    pub tau: f64,
    pub a: usize,
    pub values: Vec<f64>,
    pub method: String,
    pub params: serde_json::Value,
    pub image_id: String,
}

impl FusedMap {
    pub fn record(&self) -> FusedMapRecord {
        FusedMapRecord {
            prompt: self.prompt.clone(),
            tau: self.tau,
            a: self.grid.rows,
            values: self.grid.values.clone(),
            method: self.method.name().to_string(),
            params: self.method.params_json(),
            image_id: self.image_id.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record())?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

impl FusedMapRecord {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| VlxError::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Fuses `stack` with a text embedding under `tau`, no model involved.
pub fn fuse(stack: &MapStack, text_embedding: &[f64], tau: f64) -> Result<Grid> {
    fuse_grids(&stack.maps, text_embedding, tau)
}

/// Fuses `stack` for `prompt` under `model`, refusing stacks built from
/// other parameters.
pub fn fuse_prompt(model: &DualEncoderModel, stack: &MapStack, prompt: &str) -> Result<FusedMap> {
    stack.check_model(model)?;
    let text_embedding = model.encode_prompt(prompt)?;
    let grid = fuse(stack, &text_embedding, model.tau())?;
    Ok(FusedMap {
        grid,
        prompt: prompt.to_string(),
        text_embedding,
        tau: model.tau(),
        method: stack.method.clone(),
        image_id: stack.image_id.clone(),
        fingerprint: stack.fingerprint,
    })
}

/// Stack (from `cache` when possible) and fuse in one call.
pub fn explain_fused(
    model: &DualEncoderModel,
    img: &ImageInput,
    prompt: &str,
    method: &Method,
    cache: &StackCache,
) -> Result<(FusedMap, CacheOutcome)> {
    let text_embedding = model.encode_prompt(prompt)?;
    let (stack, outcome) = cache.get_or_build(model, img, method)?;
    stack.check_model(model)?;
    let grid = fuse(&stack, &text_embedding, model.tau())?;
    let fused = FusedMap {
        grid,
        prompt: prompt.to_string(),
        text_embedding,
        tau: model.tau(),
        method: method.clone(),
        image_id: stack.image_id.clone(),
        fingerprint: stack.fingerprint,
    };
    Ok((fused, outcome))
}

/// Attribution of the post-softmax probability of class `class`.
pub fn explain_conventional(
    model: &DualEncoderModel,
    img: &ImageInput,
    prompt_sets: &[PromptSet],
    class: usize,
    method: &Method,
) -> Result<AttributionMap> {
    let target = ScalarTarget::ClassProbability {
        class,
        prompt_sets: prompt_sets.to_vec(),
    };
    attribute(model, img, &target, method)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(values: Vec<f64>) -> Grid {
        Grid::from_values(2, 2, values).unwrap()
    }

    #[test]
    fn one_hot_selects_a_map() {
        let maps = vec![grid(vec![1.0, 2.0, 3.0, 4.0]), grid(vec![-1.0, 0.5, 0.0, 7.0])];
        let out = fuse_grids(&maps, &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(out, maps[1]);
    }

    #[test]
    fn zero_stack_fuses_to_zero() {
        let maps = vec![Grid::zeros(2, 2); 3];
        let out = fuse_grids(&maps, &[0.6, 0.0, 0.8], 5.0).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let maps = vec![Grid::zeros(2, 2); 3];
        assert!(matches!(
            fuse_grids(&maps, &[1.0, 0.0], 1.0),
            Err(VlxError::Dimension { .. })
        ));
    }
}
