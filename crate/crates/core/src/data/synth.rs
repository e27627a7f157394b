use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlxError};
use crate::model::{ImageInput, Vocab};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
    Cross,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Circle, Shape::Square, Shape::Triangle, Shape::Cross];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Square => "square",
            Shape::Triangle => "triangle",
            Shape::Cross => "cross",
        }
    }

    pub fn class_id(self) -> usize {
        self as usize
    }

    /// Whether the pixel centre offset `(dy, dx)` from the shape centre lies
    /// inside a shape of extent `size`.
    fn contains(self, dy: f64, dx: f64, size: f64) -> bool {
        let h = size / 2.0;
        match self {
            Shape::Circle => dy * dy + dx * dx <= h * h,
            Shape::Square => dy.abs() <= h && dx.abs() <= h,
            Shape::Triangle => {
                // apex up, base at the bottom edge
                let t = (dy + h) / size;
                (0.0..=1.0).contains(&t) && dx.abs() <= t * h
            }
            Shape::Cross => {
                let arm = size / 8.0;
                (dy.abs() <= arm && dx.abs() <= h) || (dx.abs() <= arm && dy.abs() <= h)
            }
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
    Center,
}

impl Location {
    pub const ALL: [Location; 5] = [
        Location::UpperLeft,
        Location::UpperRight,
        Location::LowerLeft,
        Location::LowerRight,
        Location::Center,
    ];

    pub fn words(self) -> &'static str {
        match self {
            Location::UpperLeft => "upper left",
            Location::UpperRight => "upper right",
            Location::LowerLeft => "lower left",
            Location::LowerRight => "lower right",
            Location::Center => "center",
        }
    }

    /// Centres within `side/8` of the image centre on both axes are
    /// "center"; everything else is named by quadrant.
    pub fn of(center: (f64, f64), side: usize) -> Self {
        let mid = side as f64 / 2.0;
        let band = side as f64 / 8.0;
        let (r, c) = center;
        if (r - mid).abs() <= band && (c - mid).abs() <= band {
            return Location::Center;
        }
        match (r < mid, c < mid) {
            (true, true) => Location::UpperLeft,
            (true, false) => Location::UpperRight,
            (false, true) => Location::LowerLeft,
            (false, false) => Location::LowerRight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeWord {
    Small,
    Large,
}

impl SizeWord {
    pub fn word(self) -> &'static str {
        match self {
            SizeWord::Small => "small",
            SizeWord::Large => "large",
        }
    }

    /// "large" from a quarter of the image side upwards.
    pub fn of(size: usize, side: usize) -> Self {
        if 4 * size >= side {
            SizeWord::Large
        } else {
            SizeWord::Small
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    /// (row, col) in pixel coordinates; pixel `(i, j)` has centre `(i+½, j+½)`.
    pub center: (f64, f64),
    pub size: usize,
    pub intensity: f64,
    pub location: Location,
    pub size_word: SizeWord,
}

impl ShapeSpec {
    pub fn caption(&self) -> String {
        format!(
            "{} {} at the {}",
            self.size_word.word(),
            self.shape.name(),
            self.location.words()
        )
    }

    pub fn mask(&self, side: usize) -> Vec<bool> {
        let mut mask = vec![false; side * side];
        let s = self.size as f64;
        for i in 0..side {
            for j in 0..side {
                let dy = i as f64 + 0.5 - self.center.0;
                let dx = j as f64 + 0.5 - self.center.1;
                mask[i * side + j] = self.shape.contains(dy, dx, s);
            }
        }
        mask
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub image_side: usize,
    pub n_classes: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub background: f64,
    pub noise_std: f64,
    pub intensity_range: (f64, f64),
}

impl SynthConfig {
    pub fn new(image_side: usize) -> Self {
        Self {
            image_side,
            n_classes: 4,
            min_size: (image_side * 3 / 16).max(2),
            max_size: image_side / 2,
            background: 0.1,
            noise_std: 0.05,
            intensity_range: (0.5, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=Shape::ALL.len()).contains(&self.n_classes) {
            return Err(VlxError::Config(format!(
                "class count must be 1..={}, got {}",
                Shape::ALL.len(),
                self.n_classes
            )));
        }
        if self.min_size < 2 || self.min_size > self.max_size {
            return Err(VlxError::Config(format!(
                "shape size range {}..={} is empty or too small",
                self.min_size, self.max_size
            )));
        }
        if self.max_size >= self.image_side {
            return Err(VlxError::Config(format!(
                "shape size {} cannot be placed in a {}-pixel image",
                self.max_size, self.image_side
            )));
        }
        let (lo, hi) = self.intensity_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) || !(0.0..=1.0).contains(&self.background) {
            return Err(VlxError::Config("intensities must lie in (0, 1]".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(VlxError::Config("noise std must be non-negative".into()));
        }
        Ok(())
    }

    pub fn classes(&self) -> &'static [Shape] {
        &Shape::ALL[..self.n_classes]
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes().iter().map(|s| s.name().to_string()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: ImageInput,
    pub caption: String,
    pub class_id: usize,
    pub spec: ShapeSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub config: SynthConfig,
    pub seed: u64,
    pub samples: Vec<Sample>,
    pub vocab: Vocab,
}

impl Corpus {
    /// Mean pixel value over every image, used as the default occlusion fill.
    pub fn mean_pixel(&self) -> f64 {
        let total: f64 = self
            .samples
            .iter()
            .map(|s| s.image.pixels().iter().sum::<f64>())
            .sum();
        let count: usize = self.samples.iter().map(|s| s.image.pixels().len()).sum();
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stored pixels are 8-bit levels so the corpus survives a PGM round trip
/// exactly.
fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn draw_spec(shape: Shape, size: usize, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> ShapeSpec {
    let side = cfg.image_side as f64;
    let h = size as f64 / 2.0;
    let center = (rng.random_range(h..=side - h), rng.random_range(h..=side - h));
    let (lo, hi) = cfg.intensity_range;
    ShapeSpec {
        shape,
        center,
        size,
        intensity: rng.random_range(lo..=hi),
        location: Location::of(center, cfg.image_side),
        size_word: SizeWord::of(size, cfg.image_side),
    }
}

fn paint(cfg: &SynthConfig, shapes: &[(&ShapeSpec, &[bool])], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = cfg.image_side * cfg.image_side;
    (0..n)
        .map(|p| {
            let base = shapes
                .iter()
                .find(|(_, m)| m[p])
                .map_or(cfg.background, |(s, _)| s.intensity);
            let z: f64 = StandardNormal.sample(rng);
            quantize(base + cfg.noise_std * z)
        })
        .collect()
}

/// Smallest mask a placed shape may have, `π·min_size²/8` pixels.
fn mask_floor(cfg: &SynthConfig) -> f64 {
    std::f64::consts::PI * (cfg.min_size as f64).powi(2) / 8.0
}

const MAX_PLACEMENTS: usize = 256;

/// Redraws until the rasterized mask reaches [`mask_floor`]; thin crosses
/// near the minimum size can miss most pixel centers on small grids.
fn place_shape(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> ShapeSpec,
) -> Result<(ShapeSpec, Vec<bool>)> {
    let floor = mask_floor(cfg);
    for _ in 0..MAX_PLACEMENTS {
        let spec = draw(rng);
        let mask = spec.mask(cfg.image_side);
        if mask.iter().filter(|&&m| m).count() as f64 >= floor {
            return Ok((spec, mask));
        }
    }
    Err(VlxError::Config(format!(
        "no placement reached {floor:.1} mask pixels at side {}",
        cfg.image_side
    )))
}

fn generate_sample(cfg: &SynthConfig, seed: u64, index: usize) -> Result<Sample> {
    let mut rng = sample_rng(seed, index as u64);
    let shape = cfg.classes()[rng.random_range(0..cfg.n_classes)];
    let (spec, mask) = place_shape(cfg, &mut rng, |rng| {
        let size = rng.random_range(cfg.min_size..=cfg.max_size);
        draw_spec(shape, size, cfg, rng)
    })?;
    let pixels = paint(cfg, &[(&spec, &mask)], &mut rng);
    let image = ImageInput::new(cfg.image_side, pixels)?
        .with_mask(mask)?
        .with_class(shape.class_id());
    Ok(Sample {
        image,
        caption: spec.caption(),
        class_id: shape.class_id(),
        spec,
    })
}

/// `n` samples, each a pure function of `(config, seed, index)`.
pub fn generate_dataset(n: usize, config: &SynthConfig, seed: u64) -> Result<Corpus> {
    if n == 0 {
        return Err(VlxError::Parameter("corpus size must be at least 1".into()));
    }
    config.validate()?;
    let samples = (0..n)
        .into_par_iter()
        .map(|i| generate_sample(config, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let vocab = Vocab::from_texts(samples.iter().map(|s| s.caption.as_str()));
    Ok(Corpus {
        config: config.clone(),
        seed,
        samples,
        vocab,
    })
}

/// Two shapes of different classes in one image.
#[derive(Clone, Debug)]
pub struct Composite {
    pub image: ImageInput,
    pub first: ShapeSpec,
    pub second: ShapeSpec,
    pub first_mask: Vec<bool>,
    pub second_mask: Vec<bool>,
}

/// Places `first` and `second` in opposite halves (left/right or
/// top/bottom, chosen at random) so their masks never overlap.
pub fn generate_composite(
    config: &SynthConfig,
    first: Shape,
    second: Shape,
    seed: u64,
) -> Result<Composite> {
    config.validate()?;
    let side = config.image_side;
    let half = side / 2;
    let max_size = config.max_size.min(half.saturating_sub(2));
    if max_size < config.min_size {
        return Err(VlxError::Config(format!(
            "two shapes of size {} do not fit side by side in {side} pixels",
            config.min_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizontal = rng.random_bool(0.5);
    let swap = rng.random_bool(0.5);
    let place = |shape: Shape, slot: usize, rng: &mut ChaCha8Rng| {
        let size = rng.random_range(config.min_size..=max_size);
        let h = size as f64 / 2.0;
        let lo = (slot * half) as f64 + h;
        let hi = ((slot + 1) * half) as f64 - h;
        let along = rng.random_range(lo..=hi);
        let across = rng.random_range(h..=side as f64 - h);
        let center = if horizontal {
            (across, along)
        } else {
            (along, across)
        };
        let (ilo, ihi) = config.intensity_range;
        ShapeSpec {
            shape,
            center,
            size,
            intensity: rng.random_range(ilo..=ihi),
            location: Location::of(center, side),
            size_word: SizeWord::of(size, side),
        }
    };
    let (slot_a, slot_b) = if swap { (1, 0) } else { (0, 1) };
    let (a, mask_a) = place_shape(config, &mut rng, |rng| place(first, slot_a, rng))?;
    let (b, mask_b) = place_shape(config, &mut rng, |rng| place(second, slot_b, rng))?;
    let pixels = paint(config, &[(&a, &mask_a), (&b, &mask_b)], &mut rng);
    Ok(Composite {
        image: ImageInput::new(side, pixels)?,
        first: a,
        second: b,
        first_mask: mask_a,
        second_mask: mask_b,
    })
}
