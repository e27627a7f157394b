use super::{input_dims, jacobian, to_grids, Grid, VectorFunction};
use crate::error::Result;
use crate::tensor::Tensor;

/// Signed input gradient of every output.
pub fn saliency_maps<F: VectorFunction + ?Sized>(f: &F, input: &Tensor) -> Result<Vec<Grid>> {
    let (rows, cols) = input_dims(input)?;
    let (_, grads) = jacobian(f, input)?;
    Ok(to_grids(rows, cols, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::fixtures::Linear;

    #[test]
    fn linear_map_gives_its_weights() {
        let f = Linear::new(1, 3, vec![1.0, -2.0, 3.0]);
        let x = Tensor::new(vec![1, 3], vec![0.3, 0.1, 0.9]).unwrap();
        let maps = saliency_maps(&f, &x).unwrap();
        assert_eq!(maps[0].values, vec![1.0, -2.0, 3.0]);
    }
}
