//! Heatmap rendering of attribution maps over their grayscale image.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VlxError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colormap {
    /// Blue for negative, white at zero, red for positive.
    Diverging,
    /// Black through red and yellow to white.
    Magnitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the largest magnitude.
    SymmetricMax,
    /// Stretch `[min, max]` onto the full range.
    MinMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub colormap: Colormap,
    pub alpha: f64,
    pub normalization: Normalization,
}

impl RenderSpec {
    pub fn diverging(alpha: f64) -> Self {
        Self {
            colormap: Colormap::Diverging,
            alpha,
            normalization: Normalization::SymmetricMax,
        }
    }

    pub fn magnitude(alpha: f64) -> Self {
        Self {
            colormap: Colormap::Magnitude,
            alpha,
            normalization: Normalization::SymmetricMax,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(VlxError::Parameter(format!(
                "overlay alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.colormap == Colormap::Diverging && self.normalization != Normalization::SymmetricMax
        {
            return Err(VlxError::Parameter(
                "the diverging colormap needs symmetric-max normalization".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn flat(&self) -> Vec<u8> {
        self.data.iter().flatten().copied().collect()
    }
}

/// Heat color in `[0, 255]³` for every value. A constant map takes the
/// colormap's middle color.
pub fn heat_colors(values: &[f64], spec: &RenderSpec) -> Result<Vec<[f64; 3]>> {
    spec.validate()?;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let constant = values.is_empty() || min == max;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(values
        .iter()
        .map(|&v| match spec.colormap {
            Colormap::Diverging => {
                let t = if constant || scale == 0.0 { 0.0 } else { v / scale };
                diverging(t)
            }
            Colormap::Magnitude => {
                let u = if constant {
                    0.5
                } else {
                    match spec.normalization {
                        Normalization::SymmetricMax => v.abs() / scale,
                        Normalization::MinMax => (v - min) / (max - min),
                    }
                };
                black_hot(u)
            }
        })
        .collect())
}

fn diverging(t: f64) -> [f64; 3] {
    let t = t.clamp(-1.0, 1.0);
    if t >= 0.0 {
        let fade = 255.0 * (1.0 - t);
        [255.0, fade, fade]
    } else {
        let fade = 255.0 * (1.0 + t);
        [fade, fade, 255.0]
    }
}

fn black_hot(u: f64) -> [f64; 3] {
    let u = u.clamp(0.0, 1.0);
    let ramp = |x: f64| 255.0 * x.clamp(0.0, 1.0);
    [ramp(3.0 * u), ramp(3.0 * u - 1.0), ramp(3.0 * u - 2.0)]
}

/// `alpha·heat + (1 − alpha)·base`, with `base` pixels in `[0, 1]`.
pub fn render_heatmap(
    values: &[f64],
    base: &[f64],
    width: usize,
    height: usize,
    spec: &RenderSpec,
) -> Result<RgbImage> {
    if values.len() != width * height || base.len() != width * height {
        return Err(VlxError::Dimension {
            op: "render",
            lhs: vec![height, width],
            rhs: vec![values.len(), base.len()],
        });
    }
    let heat = heat_colors(values, spec)?;
    let a = spec.alpha;
    let data = heat
        .iter()
        .zip(base)
        .map(|(h, &g)| {
            let gray = 255.0 * g.clamp(0.0, 1.0);
            h.map(|c| (a * c + (1.0 - a) * gray).round().clamp(0.0, 255.0) as u8)
        })
        .collect();
    Ok(RgbImage {
        width,
        height,
        data,
    })
}
