//! Scores for comparing attribution maps.

use crate::error::{Result, VlxError};

/// Indices of the `ceil(n/10)` largest-magnitude values, ties to the lower
/// index.
pub fn top_decile(values: &[f64]) -> Vec<usize> {
    let k = values.len().div_ceil(10);
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Share of the top-decile attribution magnitude that lies inside `mask`.
/// An all-zero map scores 0.
pub fn localization_mass(values: &[f64], mask: &[bool]) -> Result<f64> {
    if values.len() != mask.len() {
        return Err(VlxError::Dimension {
            op: "localization mass",
            lhs: vec![values.len()],
            rhs: vec![mask.len()],
        });
    }
    let (mut inside, mut total) = (0.0, 0.0);
    for i in top_decile(values) {
        let m = values[i].abs();
        total += m;
        if mask[i] {
            inside += m;
        }
    }
    Ok(if total > 0.0 { inside / total } else { 0.0 })
}

/// Pearson correlation, `None` when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(VlxError::Dimension {
            op: "pearson",
            lhs: vec![a.len()],
            rhs: vec![b.len()],
        });
    }
    if a.is_empty() {
        return Ok(None);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(None);
    }
    Ok(Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)))
}

/// Mean Pearson correlation over all unordered pairs of `maps`, skipping
/// pairs where it is undefined. `None` when no pair is defined.
pub fn mean_pairwise_correlation(maps: &[&[f64]]) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..maps.len() {
        for j in i + 1..maps.len() {
            if let Some(r) = pearson(maps[i], maps[j])? {
                sum += r;
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}
