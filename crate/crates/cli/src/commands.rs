use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use vlx_core::attribution::Method;
use vlx_core::data::{
    build_prompt_sets, generate_dataset, label_prompt_sets, load_image, read_corpus,
    write_corpus, write_png_rgb, PromptSet, SynthConfig,
};
use vlx_core::fusion::{explain_fused, fuse_prompt, per_dimension_maps, FusedMap, MapStack, StackCache};
use vlx_core::io::write_atomic;
use vlx_core::model::{train_contrastive, DualEncoderModel, ImageInput, ModelConfig, TextInput, TrainOptions};
use vlx_core::render::{render_heatmap, RenderSpec};
use vlx_core::{Result, VlxError};

use crate::args::{ExplainArgs, FuseArgs, GenArgs, RenderArgs, StackArgs, TrainArgs};

pub const PROMPTS_FILE: &str = "prompts.json";

/// Prompt sets written next to a corpus.
#[derive(Serialize, Deserialize)]
pub struct PromptsFile {
    pub prompt_sets: Vec<PromptSet>,
    pub label_sets: Vec<PromptSet>,
}

impl PromptsFile {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

pub fn io_err(path: &Path, e: std::io::Error) -> VlxError {
    VlxError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn gen(a: GenArgs) -> Result<()> {
    let mut config = SynthConfig::new(a.side);
    config.n_classes = a.classes;
    let corpus = generate_dataset(a.n, &config, a.seed)?;
    write_corpus(&a.out, &corpus)?;
    let prompt_sets = build_prompt_sets(&config.class_names(), a.prompts, a.seed)?;
    let label_sets = label_prompt_sets(&prompt_sets);
    let file = PromptsFile {
        prompt_sets,
        label_sets,
    };
    write_atomic(&a.out.join(PROMPTS_FILE), &serde_json::to_vec_pretty(&file)?)?;
    println!(
        "wrote {} samples ({}x{}, {} classes) to {}",
        a.n,
        a.side,
        a.side,
        a.classes,
        a.out.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let mut config = ModelConfig::new(corpus.vocab.clone());
    config.image_side = corpus.config.image_side;
    config.patch_size = a.patch;
    config.vision_hidden = a.vision_hidden;
    config.text_hidden = a.text_hidden;
    config.embed_dim = a.embed_dim;
    config.init_temperature = a.init_temp;
    config.seed = a.seed;
    let mut model = DualEncoderModel::new(config)?;
    let captions = corpus
        .samples
        .iter()
        .map(|s| model.tokenize(&s.caption))
        .collect::<Result<Vec<TextInput>>>()?;
    let pairs: Vec<(&ImageInput, &TextInput)> = corpus
        .samples
        .iter()
        .zip(&captions)
        .map(|(s, c)| (&s.image, c))
        .collect();
    let opts = TrainOptions {
        epochs: a.epochs,
        batch_size: a.batch,
        lr: a.lr,
        momentum: a.momentum,
        seed: a.seed,
    };
    let start = Instant::now();
    let history = train_contrastive(&mut model, &pairs, &opts)?;
    model.save(&a.out)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, loss) in history.iter().enumerate() {
        writeln!(csv, "{e},{loss}").expect("string write");
    }
    let log = a.loss_log.unwrap_or_else(|| a.out.with_extension("loss.csv"));
    write_atomic(&log, csv.as_bytes())?;
    println!(
        "trained {} epochs in {:.1}s, final loss {:.4}, tau {:.3}",
        history.len(),
        start.elapsed().as_secs_f64(),
        history.last().copied().unwrap_or(f64::NAN),
        model.tau()
    );
    Ok(())
}

fn load_model_and_image(model: &Path, image: &Path) -> Result<(DualEncoderModel, ImageInput)> {
    let model = DualEncoderModel::load(model)?;
    let img = load_image(image, model.image_side())?;
    Ok((model, img))
}

pub fn stack(a: StackArgs) -> Result<()> {
    let method = a.method.to_method()?;
    let (model, img) = load_model_and_image(&a.model, &a.image)?;
    let start = Instant::now();
    let stack = per_dimension_maps(&model, &img, &method)?;
    stack.save(&a.out)?;
    println!(
        "stack: built {} maps of {}x{} in {:.3}s",
        stack.embed_dim(),
        stack.side(),
        stack.side(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn render_png(
    path: &Path,
    fused: &FusedMap,
    base: Option<&ImageInput>,
    spec: &RenderSpec,
) -> Result<()> {
    let a = fused.grid.rows;
    let (base, spec) = match base {
        Some(img) => (img.pixels().to_vec(), *spec),
        None => (vec![0.0; a * a], RenderSpec { alpha: 1.0, ..*spec }),
    };
    let img = render_heatmap(&fused.grid.values, &base, a, a, &spec)?;
    write_png_rgb(path, a, a, &img.flat())
}

fn render_if_requested(
    png: Option<&PathBuf>,
    fused: &FusedMap,
    base: Option<&ImageInput>,
    render: &RenderArgs,
    method: &Method,
) -> Result<()> {
    if let Some(path) = png {
        render_png(path, fused, base, &render.spec(method)?)?;
    }
    Ok(())
}

pub fn fuse(a: FuseArgs) -> Result<()> {
    let start = Instant::now();
    let model = DualEncoderModel::load(&a.model)?;
    let stack = MapStack::load(&a.stack)?;
    let fused = fuse_prompt(&model, &stack, &a.prompt)?;
    fused.write_json(&a.out)?;
    let base = match &a.image {
        Some(p) => Some(load_image(p, model.image_side())?),
        None => None,
    };
    render_if_requested(a.png.as_ref(), &fused, base.as_ref(), &a.render, &stack.method)?;
    println!("stack: cached");
    println!("fused `{}` in {:.3}s", a.prompt, start.elapsed().as_secs_f64());
    Ok(())
}

pub fn explain(a: ExplainArgs) -> Result<()> {
    let method = a.method.to_method()?;
    let (model, img) = load_model_and_image(&a.model, &a.image)?;
    let cache = match &a.cache_dir {
        Some(dir) => StackCache::with_dir(dir),
        None => {
            let parent = a.out.parent().filter(|p| !p.as_os_str().is_empty());
            StackCache::from_env(&parent.unwrap_or(Path::new(".")).join(".vlx-cache"))
        }
    };
    if let Some(dir) = cache.dir() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let start = Instant::now();
    let (fused, outcome) = explain_fused(&model, &img, &a.prompt, &method, &cache)?;
    fused.write_json(&a.out)?;
    render_if_requested(a.png.as_ref(), &fused, Some(&img), &a.render, &method)?;
    println!("stack: {}", if outcome.is_hit() { "cached" } else { "built" });
    println!("explained `{}` in {:.3}s", a.prompt, start.elapsed().as_secs_f64());
    Ok(())
}
