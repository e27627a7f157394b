//! On-disk corpus layout: `img_<idx>.pgm`, `mask_<idx>.pgm` and a
//! `corpus.json` manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image_io::{read_gray, write_pgm};
use super::synth::{Corpus, Sample, ShapeSpec, SynthConfig};
use crate::error::{Result, VlxError};
use crate::io::write_atomic;
use crate::model::{ImageInput, Vocab};

pub const CORPUS_MANIFEST: &str = "corpus.json";

#[derive(Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    config: SynthConfig,
    vocab: Vocab,
    samples: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    index: usize,
    image: String,
    mask: String,
    caption: String,
    class_id: usize,
    class_name: String,
    spec: ShapeSpec,
}

pub(crate) fn to_byte(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| VlxError::io(dir, e))?;
    let side = corpus.config.image_side;
    let mut entries = Vec::with_capacity(corpus.samples.len());
    for (idx, s) in corpus.samples.iter().enumerate() {
        let image = format!("img_{idx}.pgm");
        let mask = format!("mask_{idx}.pgm");
        let px: Vec<u8> = s.image.pixels().iter().map(|&p| to_byte(p)).collect();
        write_pgm(&dir.join(&image), side, side, &px)?;
        let m: Vec<u8> = s
            .image
            .mask()
            .expect("generated samples carry masks")
            .iter()
            .map(|&b| if b { 255 } else { 0 })
            .collect();
        write_pgm(&dir.join(&mask), side, side, &m)?;
        entries.push(ManifestEntry {
            index: idx,
            image,
            mask,
            caption: s.caption.clone(),
            class_id: s.class_id,
            class_name: s.spec.shape.name().to_string(),
            spec: s.spec.clone(),
        });
    }
    let manifest = Manifest {
        seed: corpus.seed,
        config: corpus.config.clone(),
        vocab: corpus.vocab.clone(),
        samples: entries,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_atomic(&dir.join(CORPUS_MANIFEST), &json)
}

pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let path = dir.join(CORPUS_MANIFEST);
    let bytes = std::fs::read(&path).map_err(|e| VlxError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;
    let side = manifest.config.image_side;
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for e in manifest.samples {
        let img = read_gray(&dir.join(&e.image))?;
        let mask = read_gray(&dir.join(&e.mask))?;
        for (name, g) in [(&e.image, &img), (&e.mask, &mask)] {
            if g.width != side || g.height != side {
                return Err(VlxError::format(
                    name.as_str(),
                    format!("expected {side}×{side}, found {}×{}", g.width, g.height),
                ));
            }
        }
        let image = ImageInput::new(side, img.pixels)?
            .with_mask(mask.pixels.iter().map(|&p| p > 0.5).collect())?
            .with_class(e.class_id);
        samples.push(Sample {
            image,
            caption: e.caption,
            class_id: e.class_id,
            spec: e.spec,
        });
    }
    Ok(Corpus {
        config: manifest.config,
        seed: manifest.seed,
        samples,
        vocab: manifest.vocab,
    })
}
