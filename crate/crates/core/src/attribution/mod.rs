//! Pixel attribution methods.
//!
//! Every method works on a [`VectorFunction`], an image-to-`R^K` map, and
//! returns one map per output coordinate. All stochastic choices (baseline
//! draws, interpolation points, occlusion windows) are made once and shared
//! by the `K` outputs, so attributing a linear combination of outputs equals
//! the same combination of the per-output maps.
//!
//! Maps are signed. Taking magnitudes is left to rendering.

mod integrated;
mod occlusion;
mod saliency;
mod shap;
mod target;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlxError};
use crate::model::{DualEncoderModel, ImageInput};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub use integrated::integrated_gradients_maps;
pub use occlusion::{occlusion_maps, window_starts, OcclusionTrace, Window};
pub use saliency::saliency_maps;
pub use shap::gradient_shap_maps;
pub use target::{ScalarTarget, TargetFunction, VisionEmbedding};

/// A differentiable map from an image tensor to `R^K`.
pub trait VectorFunction: Sync {
    fn output_dim(&self) -> usize;

    /// Records the function on `tape`; the result must hold `output_dim`
    /// values.
    fn forward<'t>(&'t self, tape: &mut Tape<'t>, input: Var) -> Result<Var>;
}

impl<F: VectorFunction + ?Sized> VectorFunction for &F {
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn forward<'t>(&'t self, tape: &mut Tape<'t>, input: Var) -> Result<Var> {
        (**self).forward(tape, input)
    }
}

/// Row-major grid of per-pixel scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(VlxError::Dimension {
                op: "grid",
                lhs: vec![rows, cols],
                rhs: vec![values.len()],
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineSpec {
    Constant { value: f64 },
    Noise { mean: f64, std: f64, seed: u64 },
    /// A constant image at the corpus mean pixel value.
    DatasetMean { mean: f64 },
}

impl BaselineSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineSpec::Constant { value } | BaselineSpec::DatasetMean { mean: value } => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(VlxError::Parameter(format!(
                        "baseline value {value} outside [0, 1]"
                    )));
                }
            }
            BaselineSpec::Noise { mean, std, .. } => {
                if !(std >= 0.0 && std.is_finite() && mean.is_finite()) {
                    return Err(VlxError::Parameter(format!(
                        "noise baseline needs finite mean and std >= 0, got ({mean}, {std})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The baseline image for an input of `shape`. Noise is drawn once from
    /// its seed, row-major.
    pub fn materialize(&self, shape: &[usize]) -> Result<Tensor> {
        self.validate()?;
        Ok(match *self {
            BaselineSpec::Constant { value } | BaselineSpec::DatasetMean { mean: value } => {
                Tensor::full(shape, value)
            }
            BaselineSpec::Noise { mean, std, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let numel = shape.iter().product();
                let data = (0..numel)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mean + std * z
                    })
                    .collect();
                Tensor::from_parts(shape.to_vec(), data)
            }
        })
    }
}

/// An attribution method with all of its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Saliency,
    Occlusion {
        window: usize,
        stride: usize,
        fill: f64,
    },
    #[serde(rename = "ig")]
    IntegratedGradients { steps: usize, baseline: BaselineSpec },
    #[serde(rename = "gradshap")]
    GradientShap {
        samples: usize,
        mean: f64,
        std: f64,
        seed: u64,
        /// Pins every interpolation coefficient instead of drawing it;
        /// only meant for tests.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fixed_alpha: Option<f64>,
    },
}

pub const METHOD_NAMES: [&str; 4] = ["saliency", "occlusion", "ig", "gradshap"];

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Saliency => "saliency",
            Method::Occlusion { .. } => "occlusion",
            Method::IntegratedGradients { .. } => "ig",
            Method::GradientShap { .. } => "gradshap",
        }
    }

    /// Whether the method is built from input gradients (as opposed to
    /// forward-pass perturbations).
    pub fn is_gradient_based(&self) -> bool {
        !matches!(self, Method::Occlusion { .. })
    }

    /// Parameters as a JSON object, without the method tag.
    pub fn params_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("methods serialize");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("method");
        }
        v
    }

    pub fn from_name_and_params(name: &str, params: &serde_json::Value) -> Result<Self> {
        if !METHOD_NAMES.contains(&name) {
            return Err(VlxError::UnknownMethod(name.to_string()));
        }
        let mut obj = match params {
            serde_json::Value::Object(o) => o.clone(),
            serde_json::Value::Null => serde_json::Map::new(),
            _ => return Err(VlxError::Parameter("method params must be an object".into())),
        };
        obj.insert("method".into(), serde_json::Value::String(name.to_string()));
        Ok(serde_json::from_value(serde_json::Value::Object(obj))?)
    }

    /// Canonical one-line descriptor; equal methods give equal strings.
    pub fn descriptor(&self) -> String {
        serde_json::to_string(self).expect("methods serialize")
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::Saliency => Ok(()),
            Method::Occlusion {
                window,
                stride,
                fill,
            } => {
                if *window == 0 {
                    return Err(VlxError::Parameter("occlusion window must be >= 1".into()));
                }
                if *stride == 0 || stride > window {
                    return Err(VlxError::Parameter(format!(
                        "occlusion stride {stride} must lie in 1..={window}"
                    )));
                }
                if !fill.is_finite() {
                    return Err(VlxError::Parameter("occlusion fill must be finite".into()));
                }
                Ok(())
            }
            Method::IntegratedGradients { steps, baseline } => {
                if *steps < 2 {
                    return Err(VlxError::Parameter(format!(
                        "integrated gradients needs at least 2 steps, got {steps}"
                    )));
                }
                baseline.validate()
            }
            Method::GradientShap {
                samples,
                mean,
                std,
                fixed_alpha,
                ..
            } => {
                if *samples < 1 {
                    return Err(VlxError::Parameter("gradient SHAP needs >= 1 sample".into()));
                }
                if !(*std >= 0.0 && std.is_finite() && mean.is_finite()) {
                    return Err(VlxError::Parameter(format!(
                        "gradient SHAP needs finite mean and std >= 0, got ({mean}, {std})"
                    )));
                }
                if fixed_alpha.is_some_and(|a| !(0.0..=1.0).contains(&a)) {
                    return Err(VlxError::Parameter("alpha must lie in [0, 1]".into()));
                }
                Ok(())
            }
        }
    }
}

/// One map per output of `f`, all sharing the method's random choices.
pub fn attribute_all<F: VectorFunction + ?Sized>(
    f: &F,
    input: &Tensor,
    method: &Method,
) -> Result<Vec<Grid>> {
    method.validate()?;
    match method {
        Method::Saliency => saliency_maps(f, input),
        Method::Occlusion {
            window,
            stride,
            fill,
        } => Ok(occlusion_maps(f, input, *window, *stride, *fill)?.maps),
        Method::IntegratedGradients { steps, baseline } => {
            let base = baseline.materialize(input.shape())?;
            integrated_gradients_maps(f, input, &base, *steps)
        }
        Method::GradientShap {
            samples,
            mean,
            std,
            seed,
            fixed_alpha,
        } => gradient_shap_maps(f, input, *mean, *std, *samples, *seed, *fixed_alpha),
    }
}

/// An attribution map for one scalar target of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionMap {
    pub grid: Grid,
    pub method: Method,
    pub target: String,
    pub image_id: String,
}

pub fn attribute(
    model: &DualEncoderModel,
    img: &ImageInput,
    target: &ScalarTarget,
    method: &Method,
) -> Result<AttributionMap> {
    let f = TargetFunction::new(model, target.clone())?;
    let mut maps = attribute_all(&f, &img.to_tensor(), method)?;
    Ok(AttributionMap {
        grid: maps.remove(0),
        method: method.clone(),
        target: target.describe(),
        image_id: img.id(),
    })
}

pub fn saliency(
    model: &DualEncoderModel,
    img: &ImageInput,
    target: &ScalarTarget,
) -> Result<AttributionMap> {
    attribute(model, img, target, &Method::Saliency)
}

pub fn occlusion(
    model: &DualEncoderModel,
    img: &ImageInput,
    target: &ScalarTarget,
    window: usize,
    stride: usize,
    fill: f64,
) -> Result<AttributionMap> {
    let method = Method::Occlusion {
        window,
        stride,
        fill,
    };
    attribute(model, img, target, &method)
}

pub fn integrated_gradients(
    model: &DualEncoderModel,
    img: &ImageInput,
    target: &ScalarTarget,
    baseline: BaselineSpec,
    steps: usize,
) -> Result<AttributionMap> {
    attribute(
        model,
        img,
        target,
        &Method::IntegratedGradients { steps, baseline },
    )
}

pub fn gradient_shap(
    model: &DualEncoderModel,
    img: &ImageInput,
    target: &ScalarTarget,
    mean: f64,
    std: f64,
    samples: usize,
    seed: u64,
) -> Result<AttributionMap> {
    let method = Method::GradientShap {
        samples,
        mean,
        std,
        seed,
        fixed_alpha: None,
    };
    attribute(model, img, target, &method)
}

/// Forward pass only.
pub fn evaluate<F: VectorFunction + ?Sized>(f: &F, input: &Tensor) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant_ref(input);
    let out = f.forward(&mut tape, x)?;
    let values = tape.value(out).data().to_vec();
    check_output_dim(f, values.len())?;
    Ok(values)
}

/// Outputs of `f` at `input` and the input gradient of each output.
pub fn jacobian<F: VectorFunction + ?Sized>(
    f: &F,
    input: &Tensor,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let x = tape.leaf_ref(input);
    let out = f.forward(&mut tape, x)?;
    let values = tape.value(out).data().to_vec();
    check_output_dim(f, values.len())?;
    let k = values.len();
    let mut rows = Vec::with_capacity(k);
    for i in 0..k {
        let mut seed = vec![0.0; k];
        seed[i] = 1.0;
        let mut grads = tape.vjp(out, Tensor::from_parts(vec![k], seed))?;
        let g = grads.take(x).expect("input is a differentiable leaf");
        rows.push(g.into_data());
    }
    Ok((values, rows))
}

fn check_output_dim<F: VectorFunction + ?Sized>(f: &F, got: usize) -> Result<()> {
    if got != f.output_dim() {
        return Err(VlxError::Dimension {
            op: "target output",
            lhs: vec![f.output_dim()],
            rhs: vec![got],
        });
    }
    Ok(())
}

/// Σ over `n` work items of `k` per-pixel vectors each, evaluated in
/// parallel but always summed in item order so the result is independent
/// of scheduling.
pub(crate) fn ordered_sum<G>(n: usize, k: usize, pixels: usize, item: G) -> Result<Vec<Vec<f64>>>
where
    G: Fn(usize) -> Result<Vec<Vec<f64>>> + Sync,
{
    let mut acc = vec![vec![0.0; pixels]; k];
    let chunk = (rayon::current_num_threads() * 2).max(1);
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let parts = (start..end)
            .into_par_iter()
            .map(&item)
            .collect::<Result<Vec<_>>>()?;
        for part in parts {
            for (a, p) in acc.iter_mut().zip(part) {
                for (x, y) in a.iter_mut().zip(p) {
                    *x += y;
                }
            }
        }
        start = end;
    }
    Ok(acc)
}

pub(crate) fn input_dims(input: &Tensor) -> Result<(usize, usize)> {
    match input.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(VlxError::Dimension {
            op: "attribution input",
            lhs: vec![0, 0],
            rhs: other.to_vec(),
        }),
    }
}

pub(crate) fn to_grids(rows: usize, cols: usize, maps: Vec<Vec<f64>>) -> Vec<Grid> {
    maps.into_iter()
        .map(|values| Grid { rows, cols, values })
        .collect()
}
