use super::{input_dims, jacobian, ordered_sum, to_grids, Grid, VectorFunction};
use crate::error::{Result, VlxError};
use crate::tensor::Tensor;

/// Integrated gradients from `baseline` to `input` with an `steps`-point
/// midpoint rule.
pub fn integrated_gradients_maps<F: VectorFunction + ?Sized>(
    f: &F,
    input: &Tensor,
    baseline: &Tensor,
    steps: usize,
) -> Result<Vec<Grid>> {
    let (rows, cols) = input_dims(input)?;
    if baseline.shape() != input.shape() {
        return Err(VlxError::Dimension {
            op: "integrated gradients baseline",
            lhs: input.shape().to_vec(),
            rhs: baseline.shape().to_vec(),
        });
    }
    if steps < 2 {
        return Err(VlxError::Parameter(format!(
            "integrated gradients needs at least 2 steps, got {steps}"
        )));
    }
    let x = input.data();
    let b = baseline.data();
    let diff: Vec<f64> = x.iter().zip(b).map(|(x, b)| x - b).collect();
    let k = f.output_dim();
    let mut sums = ordered_sum(steps, k, x.len(), |s| {
        let alpha = (s as f64 + 0.5) / steps as f64;
        let point = b.iter().zip(&diff).map(|(b, d)| b + alpha * d).collect();
        let point = Tensor::new(input.shape().to_vec(), point)?;
        Ok(jacobian(f, &point)?.1)
    })?;
    let inv = 1.0 / steps as f64;
    for map in &mut sums {
        for (v, d) in map.iter_mut().zip(&diff) {
            *v *= d * inv;
        }
    }
    Ok(to_grids(rows, cols, sums))
}
