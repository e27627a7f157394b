use std::collections::BTreeMap;

use serde::Serialize;
use vlx_core::attribution::Grid;
use vlx_core::data::{load_image, read_gray, resize_nearest, write_png_rgb};
use vlx_core::fusion::{explain_conventional, fuse, per_dimension_maps};
use vlx_core::io::write_atomic;
use vlx_core::metrics::{localization_mass, mean_pairwise_correlation};
use vlx_core::model::{DualEncoderModel, ImageInput};
use vlx_core::render::{render_heatmap, RenderSpec};
use vlx_core::{Result, VlxError};

use crate::args::CompareArgs;
use crate::commands::{io_err, PromptsFile};

pub const METRICS_FILE: &str = "metrics.json";

#[derive(Serialize)]
pub struct MapMetrics {
    pub label: String,
    pub png: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localization_mass: Option<f64>,
}

#[derive(Serialize)]
pub struct PipelineMetrics {
    /// Mean Pearson correlation over all pairs of class maps; `null` when
    /// every pair is degenerate.
    pub mean_pairwise_correlation: Option<f64>,
    pub maps: Vec<MapMetrics>,
}

#[derive(Serialize)]
pub struct MethodReport {
    pub params: serde_json::Value,
    /// Attribution of each class's post-softmax probability.
    pub conventional: PipelineMetrics,
    /// Fused with the mean embedding of each class's prompt set.
    pub fused_prompts: PipelineMetrics,
    /// Fused with the bare class label.
    pub fused_labels: PipelineMetrics,
}

#[derive(Serialize)]
pub struct Report {
    pub image_id: String,
    pub tau: f64,
    pub class_probabilities: BTreeMap<String, f64>,
    pub methods: BTreeMap<String, MethodReport>,
}

fn read_mask(path: &std::path::Path, side: usize) -> Result<Vec<bool>> {
    let img = resize_nearest(&read_gray(path)?, side);
    Ok(img.pixels.iter().map(|&p| p > 0.0).collect())
}

struct Writer<'a> {
    args: &'a CompareArgs,
    img: &'a ImageInput,
    mask: Option<&'a [bool]>,
}

impl Writer<'_> {
    fn pipeline(
        &self,
        method_name: &str,
        kind: &str,
        labels: &[String],
        grids: &[Grid],
        spec: &RenderSpec,
    ) -> Result<PipelineMetrics> {
        let a = self.img.side();
        let mut maps = Vec::with_capacity(grids.len());
        for (label, grid) in labels.iter().zip(grids) {
            let file = format!("{method_name}_{kind}_{}.png", label.replace(' ', "_"));
            let rgb = render_heatmap(&grid.values, self.img.pixels(), a, a, spec)?;
            write_png_rgb(&self.args.out.join(&file), a, a, &rgb.flat())?;
            let localization_mass = match self.mask {
                Some(m) => Some(localization_mass(&grid.values, m)?),
                None => None,
            };
            maps.push(MapMetrics {
                label: label.clone(),
                png: file,
                localization_mass,
            });
        }
        let refs: Vec<&[f64]> = grids.iter().map(|g| g.values.as_slice()).collect();
        Ok(PipelineMetrics {
            mean_pairwise_correlation: mean_pairwise_correlation(&refs)?,
            maps,
        })
    }
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let methods = a
        .methods
        .iter()
        .map(|name| a.method.with_method(name.trim()).to_method())
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(VlxError::Parameter("no methods to compare".into()));
    }
    let model = DualEncoderModel::load(&a.model)?;
    let img = load_image(&a.image, model.image_side())?;
    let prompts = PromptsFile::read(&a.prompts_file)?;
    let mask = match &a.mask {
        Some(p) => Some(read_mask(p, model.image_side())?),
        None => None,
    };
    std::fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;

    let sets = &prompts.prompt_sets;
    let labels: Vec<String> = sets.iter().map(|s| s.label.clone()).collect();
    let class_embs = model.class_embeddings(sets)?;
    let label_embs = model.class_embeddings(&prompts.label_sets)?;
    let probs = model.prompt_classify(&img, sets)?;
    let writer = Writer {
        args: &a,
        img: &img,
        mask: mask.as_deref(),
    };

    let mut report = Report {
        image_id: img.id(),
        tau: model.tau(),
        class_probabilities: labels.iter().cloned().zip(probs).collect(),
        methods: BTreeMap::new(),
    };
    for method in &methods {
        let spec = a.render.spec(method)?;
        let name = method.name();
        let conventional = (0..sets.len())
            .map(|k| Ok(explain_conventional(&model, &img, sets, k, method)?.grid))
            .collect::<Result<Vec<_>>>()?;
        let stack = per_dimension_maps(&model, &img, method)?;
        let fused_prompts = class_embs
            .iter()
            .map(|t| fuse(&stack, t, model.tau()))
            .collect::<Result<Vec<_>>>()?;
        let fused_labels = label_embs
            .iter()
            .map(|t| fuse(&stack, t, model.tau()))
            .collect::<Result<Vec<_>>>()?;
        report.methods.insert(
            name.to_string(),
            MethodReport {
                params: method.params_json(),
                conventional: writer.pipeline(name, "conventional", &labels, &conventional, &spec)?,
                fused_prompts: writer.pipeline(name, "fused_prompts", &labels, &fused_prompts, &spec)?,
                fused_labels: writer.pipeline(name, "fused_labels", &labels, &fused_labels, &spec)?,
            },
        );
    }
    let json = serde_json::to_vec_pretty(&report)?;
    write_atomic(&a.out.join(METRICS_FILE), &json)?;
    for (name, m) in &report.methods {
        let show = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!(
            "{name}: inter-class correlation conventional {} fused {}",
            show(m.conventional.mean_pairwise_correlation),
            show(m.fused_prompts.mean_pairwise_correlation)
        );
    }
    println!("report written to {}", a.out.display());
    Ok(())
}
