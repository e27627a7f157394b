use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{input_dims, jacobian, ordered_sum, to_grids, Grid, VectorFunction};
use crate::error::{Result, VlxError};
use crate::tensor::Tensor;

/// Expected gradients over Gaussian baselines `b ~ N(mean, std²)` per pixel
/// and interpolation points `b + α(x − b)`, `α ~ U(0, 1)`.
///
/// Sample `j` draws its baseline and then its `α` from a generator seeded
/// with `seed ^ j`. `fixed_alpha` replaces the `α` draw.
pub fn gradient_shap_maps<F: VectorFunction + ?Sized>(
    f: &F,
    input: &Tensor,
    mean: f64,
    std: f64,
    samples: usize,
    seed: u64,
    fixed_alpha: Option<f64>,
) -> Result<Vec<Grid>> {
    let (rows, cols) = input_dims(input)?;
    if samples < 1 {
        return Err(VlxError::Parameter("gradient SHAP needs >= 1 sample".into()));
    }
    if !(std >= 0.0 && std.is_finite() && mean.is_finite()) {
        return Err(VlxError::Parameter(format!(
            "gradient SHAP needs finite mean and std >= 0, got ({mean}, {std})"
        )));
    }
    let x = input.data();
    let k = f.output_dim();
    let mut sums = ordered_sum(samples, k, x.len(), |j| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ j as u64);
        let base: Vec<f64> = x
            .iter()
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean + std * z
            })
            .collect();
        let alpha = match fixed_alpha {
            Some(a) => a,
            None => rng.random::<f64>(),
        };
        let point = base.iter().zip(x).map(|(b, x)| b + alpha * (x - b)).collect();
        let (_, grads) = jacobian(f, &Tensor::new(input.shape().to_vec(), point)?)?;
        Ok(grads
            .into_iter()
            .map(|g| {
                g.iter()
                    .zip(x.iter().zip(&base))
                    .map(|(g, (x, b))| (x - b) * g)
                    .collect()
            })
            .collect())
    })?;
    let inv = 1.0 / samples as f64;
    for map in &mut sums {
        map.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(to_grids(rows, cols, sums))
}
