use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use vlx_core::attribution::{BaselineSpec, Method, METHOD_NAMES};
use vlx_core::data::read_corpus;
use vlx_core::render::{Colormap, Normalization, RenderSpec};
use vlx_core::{Result, VlxError};

#[derive(Parser)]
#[command(name = "vlx", version, about = "Prompt-conditioned attribution maps for a toy dual encoder")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic shapes corpus and its prompt sets.
    Gen(GenArgs),
    /// Train a dual encoder on a corpus.
    Train(TrainArgs),
    /// Build the per-dimension map stack of one image.
    Stack(StackArgs),
    /// Fuse a saved stack with a prompt.
    Fuse(FuseArgs),
    /// Stack (cached) and fuse in one step.
    Explain(ExplainArgs),
    /// Conventional and fused maps side by side, with metrics.
    Compare(CompareArgs),
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub side: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prompts per class.
    #[arg(long, default_value_t = 10)]
    pub prompts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    /// Peak learning rate of the cosine schedule.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub init_temp: f64,
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    #[arg(long, default_value_t = 128)]
    pub vision_hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub text_hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss log; defaults to the checkpoint path with a `.loss.csv` suffix.
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct MethodArgs {
    /// saliency, occlusion, ig or gradshap.
    #[arg(long)]
    pub method: String,
    /// Occlusion window side.
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    /// Occlusion stride.
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    /// Occlusion fill value; defaults to the mean pixel of `--corpus`.
    #[arg(long)]
    pub fill: Option<f64>,
    /// Integrated-gradients steps.
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    /// Integrated-gradients baseline: `zero`, `white`, `const:V`,
    /// `noise:MEAN:STD` or `dataset-mean`.
    #[arg(long, default_value = "zero")]
    pub baseline: String,
    /// Gradient-SHAP samples.
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    /// Gradient-SHAP baseline noise mean.
    #[arg(long, default_value_t = 0.5)]
    pub noise_mean: f64,
    /// Gradient-SHAP baseline noise standard deviation.
    #[arg(long, default_value_t = 0.25)]
    pub noise_std: f64,
    /// Seed for noise baselines and gradient-SHAP draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corpus whose mean pixel serves as the dataset-mean default.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct RenderArgs {
    /// Defaults to diverging for gradient methods and magnitude for
    /// occlusion.
    #[arg(long, value_enum)]
    pub colormap: Option<ColormapArg>,
    #[arg(long, value_enum, default_value = "symmetric-max")]
    pub norm: NormArg,
    #[arg(long, default_value_t = 0.6)]
    pub alpha: f64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ColormapArg {
    Diverging,
    Magnitude,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum NormArg {
    SymmetricMax,
    Minmax,
}

#[derive(Args)]
pub struct StackArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub prompt: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub png: Option<PathBuf>,
    /// Image drawn under the heatmap in `--png`.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[command(flatten)]
    pub render: RenderArgs,
}

#[derive(Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub prompt: String,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub png: Option<PathBuf>,
    /// Stack cache directory; `VLX_CACHE_DIR` or `.vlx-cache` next to
    /// `--out` when unset.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[command(flatten)]
    pub render: RenderArgs,
}

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// `prompts.json` as written by `gen`.
    #[arg(long)]
    pub prompts_file: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "saliency")]
    pub methods: Vec<String>,
    /// Object mask (PGM/PNG, nonzero inside) for localization mass.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub method: CompareMethodArgs,
    #[command(flatten)]
    pub render: RenderArgs,
}

/// Method parameters shared by every method of a comparison.
#[derive(Args, Clone)]
pub struct CompareMethodArgs {
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    #[arg(long)]
    pub fill: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value = "zero")]
    pub baseline: String,
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise_mean: f64,
    #[arg(long, default_value_t = 0.25)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

impl CompareMethodArgs {
    pub fn with_method(&self, name: &str) -> MethodArgs {
        MethodArgs {
            method: name.to_string(),
            window: self.window,
            stride: self.stride,
            fill: self.fill,
            steps: self.steps,
            baseline: self.baseline.clone(),
            samples: self.samples,
            noise_mean: self.noise_mean,
            noise_std: self.noise_std,
            seed: self.seed,
            corpus: self.corpus.clone(),
        }
    }
}

fn corpus_mean(corpus: Option<&Path>, what: &str) -> Result<f64> {
    let Some(dir) = corpus else {
        return Err(VlxError::Parameter(format!(
            "{what} defaults to the dataset mean; pass --corpus or set it explicitly"
        )));
    };
    Ok(read_corpus(dir)?.mean_pixel())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| VlxError::Parameter(format!("{what}: `{s}` is not a number")))
}

impl MethodArgs {
    pub fn to_method(&self) -> Result<Method> {
        let method = match self.method.as_str() {
            "saliency" => Method::Saliency,
            "occlusion" => Method::Occlusion {
                window: self.window,
                stride: self.stride,
                fill: match self.fill {
                    Some(f) => f,
                    None => corpus_mean(self.corpus.as_deref(), "occlusion fill")?,
                },
            },
            "ig" => Method::IntegratedGradients {
                steps: self.steps,
                baseline: self.baseline_spec()?,
            },
            "gradshap" => Method::GradientShap {
                samples: self.samples,
                mean: self.noise_mean,
                std: self.noise_std,
                seed: self.seed,
                fixed_alpha: None,
            },
            other => {
                debug_assert!(!METHOD_NAMES.contains(&other));
                return Err(VlxError::UnknownMethod(other.to_string()));
            }
        };
        method.validate()?;
        Ok(method)
    }

    fn baseline_spec(&self) -> Result<BaselineSpec> {
        let b = self.baseline.as_str();
        let parts: Vec<&str> = b.split(':').collect();
        Ok(match parts.as_slice() {
            ["zero"] => BaselineSpec::Constant { value: 0.0 },
            ["white"] => BaselineSpec::Constant { value: 1.0 },
            ["const", v] => BaselineSpec::Constant {
                value: parse_f64(v, "baseline")?,
            },
            ["noise", mean, std] => BaselineSpec::Noise {
                mean: parse_f64(mean, "baseline mean")?,
                std: parse_f64(std, "baseline std")?,
                seed: self.seed,
            },
            ["dataset-mean"] => BaselineSpec::DatasetMean {
                mean: corpus_mean(self.corpus.as_deref(), "the dataset-mean baseline")?,
            },
            _ => {
                return Err(VlxError::Parameter(format!(
                    "unrecognized baseline `{b}`; use zero, white, const:V, noise:MEAN:STD or dataset-mean"
                )))
            }
        })
    }
}

impl RenderArgs {
    pub fn spec(&self, method: &Method) -> Result<RenderSpec> {
        let colormap = match self.colormap {
            Some(ColormapArg::Diverging) => Colormap::Diverging,
            Some(ColormapArg::Magnitude) => Colormap::Magnitude,
            None if method.is_gradient_based() => Colormap::Diverging,
            None => Colormap::Magnitude,
        };
        let normalization = match self.norm {
            NormArg::SymmetricMax => Normalization::SymmetricMax,
            NormArg::Minmax => Normalization::MinMax,
        };
        let spec = RenderSpec {
            colormap,
            alpha: self.alpha,
            normalization,
        };
        spec.validate()?;
        Ok(spec)
    }
}
