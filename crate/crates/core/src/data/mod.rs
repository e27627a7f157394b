//! Synthetic shapes-with-captions corpus, prompt sets and image files.

mod corpus;
mod image_io;
mod prompts;
mod synth;

use serde::{Deserialize, Serialize};

pub use corpus::{read_corpus, write_corpus, CORPUS_MANIFEST};
pub use image_io::{
    decode_image, load_image, read_gray, resize_nearest, write_pgm, write_png_gray, write_png_rgb,
    GrayImage,
};
pub use prompts::{build_prompt_sets, label_prompt_sets, prompt_pool};
pub use synth::{
    generate_composite, generate_dataset, Composite, Corpus, Location, Sample, Shape, ShapeSpec,
    SizeWord, SynthConfig,
};

/// A class label with the text prompts that describe it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub label: String,
    pub prompts: Vec<String>,
}

impl PromptSet {
    pub fn new(label: impl Into<String>, prompts: Vec<String>) -> crate::Result<Self> {
        let label = label.into();
        if prompts.is_empty() {
            return Err(crate::VlxError::Input(format!("class `{label}` has no prompts")));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = prompts.iter().find(|p| !seen.insert(p.as_str())) {
            return Err(crate::VlxError::Input(format!("duplicate prompt `{dup}`")));
        }
        Ok(Self { label, prompts })
    }
}
