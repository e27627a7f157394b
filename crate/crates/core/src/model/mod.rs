//! Dual-encoder vision-language model.
//!
//! Vision path: the image is cut into non-overlapping `p×p` patches, each
//! patch is embedded linearly (plus a learned per-position offset), passed
//! through a residual GELU block, and the patch features are mean-pooled
//! into `I ∈ R^D`. The projection head maps `I` to `R^M` and the result is
//! L2-normalized into `I_p`.
//!
//! Text path: token embeddings are mean-pooled into `R^E`, passed through a
//! residual GELU block, projected to `R^M` and normalized into `T_p`.
//!
//! The image-text logit is `L = τ · (I_p · T_p)` with `τ` a learned
//! positive scalar applied multiplicatively.

mod checkpoint;
mod tokenize;
mod train;

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::PromptSet;
use crate::error::{Result, VlxError};
use crate::numeric::softmax;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tokenize::{split_words, tokenize, TextInput, Vocab, UNK_ID, UNK_TOKEN};
pub use train::{train_contrastive, TrainOptions, TAU_MAX, TAU_MIN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub image_side: usize,
    pub patch_size: usize,
    pub vision_hidden: usize,
    pub text_hidden: usize,
    pub embed_dim: usize,
    pub vocab: Vocab,
    pub init_temperature: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(vocab: Vocab) -> Self {
        Self {
            image_side: 64,
            patch_size: 8,
            vision_hidden: 128,
            text_hidden: 64,
            embed_dim: 32,
            vocab,
            init_temperature: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.image_side,
            self.patch_size,
            self.vision_hidden,
            self.text_hidden,
            self.embed_dim,
        ];
        if dims.contains(&0) {
            return Err(VlxError::Config("model dimensions must be positive".into()));
        }
        if self.image_side % self.patch_size != 0 {
            return Err(VlxError::Config(format!(
                "patch size {} does not divide image side {}",
                self.patch_size, self.image_side
            )));
        }
        if !(self.init_temperature > 0.0 && self.init_temperature.is_finite()) {
            return Err(VlxError::Config("temperature must be positive".into()));
        }
        Ok(())
    }

    pub fn patches_per_image(&self) -> usize {
        let g = self.image_side / self.patch_size;
        g * g
    }
}

/// SHA-256 of a model checkpoint; identifies the exact parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// A square grayscale image with pixels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageInput {
    side: usize,
    pixels: Vec<f64>,
    mask: Option<Vec<bool>>,
    class: Option<usize>,
}

impl ImageInput {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if side == 0 || pixels.len() != side * side {
            return Err(VlxError::Dimension {
                op: "image",
                lhs: vec![side, side],
                rhs: vec![pixels.len()],
            });
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(VlxError::Input(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Self {
            side,
            pixels,
            mask: None,
            class: None,
        })
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.pixels.len() {
            return Err(VlxError::Dimension {
                op: "image mask",
                lhs: vec![self.side, self.side],
                rhs: vec![mask.len()],
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn with_class(mut self, class: usize) -> Self {
        self.class = Some(class);
        self
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn class(&self) -> Option<usize> {
        self.class
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(vec![self.side, self.side], self.pixels.clone())
    }

    /// Content hash of the pixel values (hex, 16 chars).
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.side as u64).to_le_bytes());
        for p in &self.pixels {
            h.update(p.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub(crate) enum Param {
    PatchEmbed,
    PatchBias,
    VisionW1,
    VisionB1,
    VisionW2,
    VisionB2,
    VisionProj,
    TokenEmbed,
    TextW1,
    TextB1,
    TextProj,
}

pub(crate) const PARAM_COUNT: usize = 11;

/// Parameters bound onto a tape for one forward pass.
pub struct ModelVars {
    params: Vec<Var>,
    pub tau: Var,
}

impl ModelVars {
    fn get(&self, p: Param) -> Var {
        self.params[p as usize]
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }
}

pub struct DualEncoderModel {
    config: ModelConfig,
    params: Vec<Tensor>,
    tau: Tensor,
    patch_index: Arc<[usize]>,
    fingerprint: OnceLock<Fingerprint>,
}

impl Clone for DualEncoderModel {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            params: self.params.clone(),
            tau: self.tau.clone(),
            patch_index: self.patch_index.clone(),
            fingerprint: self.fingerprint.clone(),
        }
    }
}

impl fmt::Debug for DualEncoderModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DualEncoderModel")
            .field("config", &self.config)
            .field("tau", &self.tau.item())
            .finish_non_exhaustive()
    }
}

impl DualEncoderModel {
    /// Freshly initialized model, deterministic in `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let p2 = config.patch_size * config.patch_size;
        let (d, e, m, v) = (
            config.vision_hidden,
            config.text_hidden,
            config.embed_dim,
            config.vocab.len(),
        );
        let mut normal = |shape: Vec<usize>, std: f64| {
            let dist = Normal::new(0.0, std).expect("positive std");
            let numel = shape.iter().product();
            let data = (0..numel).map(|_| dist.sample(&mut rng)).collect();
            Tensor::from_parts(shape, data)
        };
        let params = vec![
            // Unit-variance patch weights keep the first GELU out of its
            // linear regime on [0, 1] pixels.
            normal(vec![p2, d], 1.0),
            Tensor::zeros(&[d]),
            normal(vec![d, d], (d as f64).sqrt().recip()),
            Tensor::zeros(&[d]),
            normal(vec![d, d], (d as f64).sqrt().recip()),
            Tensor::zeros(&[d]),
            normal(vec![d, m], (d as f64).sqrt().recip()),
            normal(vec![v, e], 1.0),
            normal(vec![e, e], (e as f64).sqrt().recip()),
            Tensor::zeros(&[e]),
            normal(vec![e, m], (e as f64).sqrt().recip()),
        ];
        let tau = Tensor::scalar(config.init_temperature);
        Self::from_parts(config, params, tau)
    }

    pub(crate) fn from_parts(config: ModelConfig, params: Vec<Tensor>, tau: Tensor) -> Result<Self> {
        config.validate()?;
        let expected = expected_shapes(&config);
        if params.len() != PARAM_COUNT {
            return Err(VlxError::Config(format!(
                "expected {PARAM_COUNT} parameter tensors, got {}",
                params.len()
            )));
        }
        for (p, shape) in params.iter().zip(&expected) {
            if p.shape() != shape.as_slice() {
                return Err(VlxError::Dimension {
                    op: "parameter",
                    lhs: shape.clone(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        if !(tau.item() > 0.0) {
            return Err(VlxError::Config("temperature must be positive".into()));
        }
        let patch_index = patch_indices(config.image_side, config.patch_size, 1).into();
        Ok(Self {
            config,
            params,
            tau,
            patch_index,
            fingerprint: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.config.vocab
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    pub fn image_side(&self) -> usize {
        self.config.image_side
    }

    pub fn tau(&self) -> f64 {
        self.tau.item()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Tensor], &mut Tensor) {
        self.fingerprint = OnceLock::new();
        (&mut self.params, &mut self.tau)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        *self.fingerprint.get_or_init(|| {
            let bytes = self.to_checkpoint_bytes();
            Fingerprint(Sha256::digest(&bytes).into())
        })
    }

    pub fn tokenize(&self, raw: &str) -> Result<TextInput> {
        tokenize(raw, &self.config.vocab)
    }

    /// Puts every parameter on `tape`, differentiable when `trainable`.
    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>, trainable: bool) -> ModelVars {
        let mut put = |t: &'a Tensor| {
            if trainable {
                tape.leaf_ref(t)
            } else {
                tape.constant_ref(t)
            }
        };
        let params = self.params.iter().map(&mut put).collect();
        let tau = put(&self.tau);
        ModelVars { params, tau }
    }

    /// Normalized image embeddings `[batch, M]` for `images`, a tensor
    /// holding `batch` row-major `A×A` images back to back.
    pub fn vision_graph(
        &self,
        tape: &mut Tape<'_>,
        vars: &ModelVars,
        images: Var,
        batch: usize,
    ) -> Result<Var> {
        let cfg = &self.config;
        let a = cfg.image_side;
        let numel = tape.value(images).numel();
        if batch == 0 || numel != batch * a * a {
            return Err(VlxError::Dimension {
                op: "vision input",
                lhs: vec![batch, a, a],
                rhs: tape.value(images).shape().to_vec(),
            });
        }
        let n = cfg.patches_per_image();
        let p2 = cfg.patch_size * cfg.patch_size;
        let index = if batch == 1 {
            self.patch_index.clone()
        } else {
            patch_indices(a, cfg.patch_size, batch).into()
        };
        let patches = tape.gather(images, index, vec![batch * n, p2])?;
        let z = tape.matmul(patches, vars.get(Param::PatchEmbed))?;
        let z = tape.add(z, vars.get(Param::PatchBias))?;
        let h0 = tape.gelu(z)?;
        let h1 = residual_block(tape, h0, vars.get(Param::VisionW1), vars.get(Param::VisionB1))?;
        let h2 = residual_block(tape, h1, vars.get(Param::VisionW2), vars.get(Param::VisionB2))?;
        let pooled = tape.mean_pool_rows(h2, &vec![n; batch])?;
        let projected = tape.matmul(pooled, vars.get(Param::VisionProj))?;
        tape.l2_normalize_rows(projected)
    }

    /// Normalized text embeddings `[texts.len(), M]`.
    pub fn text_graph(
        &self,
        tape: &mut Tape<'_>,
        vars: &ModelVars,
        texts: &[&TextInput],
    ) -> Result<Var> {
        if texts.is_empty() {
            return Err(VlxError::Input("no texts to encode".into()));
        }
        let mut ids = Vec::new();
        let mut lens = Vec::with_capacity(texts.len());
        for t in texts {
            if t.tokens.is_empty() {
                return Err(VlxError::Input(format!("`{}` has no tokens", t.raw)));
            }
            // Pooling in id order makes the embedding exactly order-free.
            let mut sorted = t.tokens.clone();
            sorted.sort_unstable();
            ids.extend(sorted);
            lens.push(t.tokens.len());
        }
        let emb = tape.gather_rows(vars.get(Param::TokenEmbed), &ids)?;
        let pooled = tape.mean_pool_rows(emb, &lens)?;
        let h = residual_block(tape, pooled, vars.get(Param::TextW1), vars.get(Param::TextB1))?;
        let projected = tape.matmul(h, vars.get(Param::TextProj))?;
        tape.l2_normalize_rows(projected)
    }

    /// `I_p` for one image.
    pub fn encode_image(&self, img: &ImageInput) -> Result<Vec<f64>> {
        self.check_side(img)?;
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let x = tape.constant(img.to_tensor());
        let out = self.vision_graph(&mut tape, &vars, x, 1)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// `I_p` for several images, one row each.
    pub fn encode_images(&self, imgs: &[&ImageInput]) -> Result<Vec<Vec<f64>>> {
        if imgs.is_empty() {
            return Ok(Vec::new());
        }
        let a = self.config.image_side;
        let mut data = Vec::with_capacity(imgs.len() * a * a);
        for img in imgs {
            self.check_side(img)?;
            data.extend_from_slice(img.pixels());
        }
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let x = tape.constant(Tensor::from_parts(vec![imgs.len(), a * a], data));
        let out = self.vision_graph(&mut tape, &vars, x, imgs.len())?;
        let m = self.config.embed_dim;
        Ok(tape.value(out).data().chunks(m).map(<[f64]>::to_vec).collect())
    }

    /// `T_p` for one text.
    pub fn encode_text(&self, txt: &TextInput) -> Result<Vec<f64>> {
        Ok(self.encode_texts(&[txt])?.remove(0))
    }

    pub fn encode_texts(&self, texts: &[&TextInput]) -> Result<Vec<Vec<f64>>> {
        let v = self.config.vocab.len();
        if let Some(t) = texts.iter().find(|t| t.tokens.iter().any(|&i| i >= v)) {
            return Err(VlxError::Input(format!("token index out of vocab in `{}`", t.raw)));
        }
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let out = self.text_graph(&mut tape, &vars, texts)?;
        let m = self.config.embed_dim;
        Ok(tape.value(out).data().chunks(m).map(<[f64]>::to_vec).collect())
    }

    pub fn encode_prompt(&self, raw: &str) -> Result<Vec<f64>> {
        self.encode_text(&self.tokenize(raw)?)
    }

    /// `L = τ · (I_p · T_p)`.
    pub fn similarity(&self, image_emb: &[f64], text_emb: &[f64]) -> Result<f64> {
        scaled_similarity(self.tau(), image_emb, text_emb)
    }

    /// Mean prompt embedding per class. Because the logit is linear in the
    /// text embedding, `τ·I_p·mean(T)` equals the mean prompt logit.
    pub fn class_embeddings(&self, sets: &[PromptSet]) -> Result<Vec<Vec<f64>>> {
        if sets.is_empty() {
            return Err(VlxError::Input("no classes".into()));
        }
        let m = self.config.embed_dim;
        sets.iter()
            .map(|set| {
                if set.prompts.is_empty() {
                    return Err(VlxError::Input(format!("class `{}` has no prompts", set.label)));
                }
                let texts = set
                    .prompts
                    .iter()
                    .map(|p| self.tokenize(p))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&TextInput> = texts.iter().collect();
                let embs = self.encode_texts(&refs)?;
                let mut mean = vec![0.0; m];
                for e in &embs {
                    for (a, b) in mean.iter_mut().zip(e) {
                        *a += b;
                    }
                }
                let inv = 1.0 / embs.len() as f64;
                mean.iter_mut().for_each(|v| *v *= inv);
                Ok(mean)
            })
            .collect()
    }

    /// Zero-shot class probabilities: each class logit is the mean
    /// similarity over its prompts, followed by a softmax across classes.
    pub fn prompt_classify(&self, img: &ImageInput, sets: &[PromptSet]) -> Result<Vec<f64>> {
        let image_emb = self.encode_image(img)?;
        let logits = self.class_logits(&image_emb, sets)?;
        Ok(softmax(&logits))
    }

    pub fn class_logits(&self, image_emb: &[f64], sets: &[PromptSet]) -> Result<Vec<f64>> {
        if sets.is_empty() {
            return Err(VlxError::Input("no classes".into()));
        }
        sets.iter()
            .map(|set| {
                if set.prompts.is_empty() {
                    return Err(VlxError::Input(format!("class `{}` has no prompts", set.label)));
                }
                let mut total = 0.0;
                for p in &set.prompts {
                    total += self.similarity(image_emb, &self.encode_prompt(p)?)?;
                }
                Ok(total / set.prompts.len() as f64)
            })
            .collect()
    }

    fn check_side(&self, img: &ImageInput) -> Result<()> {
        if img.side() != self.config.image_side {
            return Err(VlxError::Dimension {
                op: "image side",
                lhs: vec![self.config.image_side],
                rhs: vec![img.side()],
            });
        }
        Ok(())
    }
}

pub fn scaled_similarity(tau: f64, image_emb: &[f64], text_emb: &[f64]) -> Result<f64> {
    if image_emb.len() != text_emb.len() {
        return Err(VlxError::Dimension {
            op: "similarity",
            lhs: vec![image_emb.len()],
            rhs: vec![text_emb.len()],
        });
    }
    let dot: f64 = image_emb.iter().zip(text_emb).map(|(a, b)| a * b).sum();
    Ok(dot * tau)
}

/// `h + gelu(h·W + b)`.
fn residual_block(tape: &mut Tape<'_>, h: Var, w: Var, b: Var) -> Result<Var> {
    let z = tape.matmul(h, w)?;
    let z = tape.add(z, b)?;
    let z = tape.gelu(z)?;
    tape.add(h, z)
}

fn expected_shapes(c: &ModelConfig) -> Vec<Vec<usize>> {
    let p2 = c.patch_size * c.patch_size;
    let (d, e, m, v) = (c.vision_hidden, c.text_hidden, c.embed_dim, c.vocab.len());
    vec![
        vec![p2, d],
        vec![d],
        vec![d, d],
        vec![d],
        vec![d, d],
        vec![d],
        vec![d, m],
        vec![v, e],
        vec![e, e],
        vec![e],
        vec![e, m],
    ]
}

/// Flat source index for every patch pixel, patches in row-major grid order.
fn patch_indices(side: usize, patch: usize, batch: usize) -> Vec<usize> {
    let grid = side / patch;
    let mut idx = Vec::with_capacity(batch * side * side);
    for b in 0..batch {
        let base = b * side * side;
        for pr in 0..grid {
            for pc in 0..grid {
                for i in 0..patch {
                    for j in 0..patch {
                        idx.push(base + (pr * patch + i) * side + pc * patch + j);
                    }
                }
            }
        }
    }
    idx
}
