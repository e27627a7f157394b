use rayon::prelude::*;

use super::{evaluate, input_dims, to_grids, Grid, VectorFunction};
use crate::error::{Result, VlxError};
use crate::tensor::Tensor;

/// A square occlusion window, top-left corner plus side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub row: usize,
    pub col: usize,
    pub size: usize,
}

/// Everything an occlusion sweep computed.
#[derive(Clone, Debug, PartialEq)]
pub struct OcclusionTrace {
    pub maps: Vec<Grid>,
    /// Windows in row-major sweep order.
    pub windows: Vec<Window>,
    /// `deltas[w][k] = f_k(x) − f_k(x with window w filled)`.
    pub deltas: Vec<Vec<f64>>,
    /// `f(x)`.
    pub base: Vec<f64>,
}

/// Start offsets along one axis: every `stride` pixels, with a final window
/// clamped to end at the edge so the whole axis is covered.
pub fn window_starts(len: usize, window: usize, stride: usize) -> Vec<usize> {
    assert!(window >= 1 && window <= len && stride >= 1);
    let mut starts = Vec::new();
    let mut p = 0;
    while p + window < len {
        starts.push(p);
        p += stride;
    }
    starts.push(len - window);
    starts
}

pub fn occlusion_maps<F: VectorFunction + ?Sized>(
    f: &F,
    input: &Tensor,
    window: usize,
    stride: usize,
    fill: f64,
) -> Result<OcclusionTrace> {
    let (rows, cols) = input_dims(input)?;
    if window == 0 || window > rows || window > cols {
        return Err(VlxError::Parameter(format!(
            "occlusion window {window} does not fit a {rows}×{cols} image"
        )));
    }
    if stride == 0 || stride > window {
        return Err(VlxError::Parameter(format!(
            "occlusion stride {stride} must lie in 1..={window}"
        )));
    }
    if !fill.is_finite() {
        return Err(VlxError::Parameter("occlusion fill must be finite".into()));
    }
    let windows: Vec<Window> = window_starts(rows, window, stride)
        .into_iter()
        .flat_map(|row| {
            window_starts(cols, window, stride)
                .into_iter()
                .map(move |col| Window {
                    row,
                    col,
                    size: window,
                })
        })
        .collect();

    let base = evaluate(f, input)?;
    let deltas = windows
        .par_iter()
        .map(|w| {
            let mut occluded = input.clone();
            let data = occluded.data_mut();
            for r in w.row..w.row + w.size {
                data[r * cols + w.col..r * cols + w.col + w.size].fill(fill);
            }
            let out = evaluate(f, &occluded)?;
            Ok(base.iter().zip(out).map(|(b, o)| b - o).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let k = base.len();
    let mut sums = vec![vec![0.0; rows * cols]; k];
    let mut counts = vec![0u32; rows * cols];
    for (w, delta) in windows.iter().zip(&deltas) {
        for r in w.row..w.row + w.size {
            for c in w.col..w.col + w.size {
                let p = r * cols + c;
                counts[p] += 1;
                for (map, d) in sums.iter_mut().zip(delta) {
                    map[p] += d;
                }
            }
        }
    }
    for map in &mut sums {
        for (v, &n) in map.iter_mut().zip(&counts) {
            *v /= f64::from(n);
        }
    }
    Ok(OcclusionTrace {
        maps: to_grids(rows, cols, sums),
        windows,
        deltas,
        base,
    })
}
