//! Gaussian target heatmaps, argmax decoding, NLL scoring and test-time
//! augmentation.

mod augment;
mod tta;

pub use augment::{AffineTransform2D, AugmentRanges, IntensityJitter, TtaParams};
pub use tta::{sample_tta_transform, sample_tta_views, tta_aggregate, warp_heatmap, HeatmapStack};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatmapError {
    #[error("landmark ({x}, {y}) is outside the {width}x{height} heatmap")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("heatmap contains a non-finite value at ({x}, {y})")]
    NonFinite { x: usize, y: usize },
    #[error("heatmap is empty")]
    Empty,
    #[error("value buffer has {got} entries, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("transform is singular (determinant {0})")]
    SingularTransform(f64),
    #[error("cannot aggregate an empty list of views")]
    NoViews,
    #[error("view {index} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(sigma: f64) -> Result<Self, HeatmapError> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self { sigma })
        } else {
            Err(HeatmapError::InvalidSigma(sigma))
        }
    }

    /// Unnormalised Gaussian response at pixel `(col, row)` for a landmark at `centre`.
    pub fn value_at(&self, col: f64, row: f64, centre: Point2) -> f64 {
        let d2 = (row - centre.y).powi(2) + (col - centre.x).powi(2);
        (-d2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

impl Default for GaussianSpec {
    fn default() -> Self {
        Self { sigma: 5.0 }
    }
}

/// Row-major grid of scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self, HeatmapError> {
        let expected = width * height;
        if values.len() != expected {
            return Err(HeatmapError::SizeMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.values[y * self.width + x] = v;
    }

    fn contains(&self, p: Point2) -> bool {
        p.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }
}

/// Renders the Gaussian target for one landmark.
///
/// The Gaussian factorises into a row term and a column term, so it is
/// evaluated as an outer product of two 1D profiles.
pub fn encode(landmark: Point2, width: usize, height: usize, spec: GaussianSpec) -> Result<Heatmap, HeatmapError> {
    GaussianSpec::new(spec.sigma)?;
    let mut hm = Heatmap::zeros(width, height);
    if !hm.contains(landmark) {
        return Err(HeatmapError::OutOfBounds {
            x: landmark.x,
            y: landmark.y,
            width,
            height,
        });
    }
    let denom = 2.0 * spec.sigma * spec.sigma;
    let cols: Vec<f64> = (0..width)
        .map(|j| (-(j as f64 - landmark.x).powi(2) / denom).exp())
        .collect();
    let rows: Vec<f64> = (0..height)
        .map(|i| (-(i as f64 - landmark.y).powi(2) / denom).exp())
        .collect();
    for (row, gy) in hm.values.chunks_exact_mut(width).zip(&rows) {
        for (v, gx) in row.iter_mut().zip(&cols) {
            *v = (gy * gx) as f32;
        }
    }
    Ok(hm)
}

/// Location of the maximum score. Ties go to the smallest row-major index.
pub fn decode_argmax(hm: &Heatmap) -> Result<Point2, HeatmapError> {
    if hm.values.is_empty() {
        return Err(HeatmapError::Empty);
    }
    let mut best = 0usize;
    let mut best_v = f32::NEG_INFINITY;
    for (i, &v) in hm.values.iter().enumerate() {
        if !v.is_finite() {
            return Err(HeatmapError::NonFinite {
                x: i % hm.width,
                y: i / hm.width,
            });
        }
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    Ok(Point2::new((best % hm.width) as f64, (best / hm.width) as f64))
}

/// Negative log-likelihood of `target` under a spatial softmax of `predicted`.
///
/// Scores are treated as unnormalised log-probabilities; the target is
/// snapped to its nearest pixel.
pub fn nll_score(predicted: &Heatmap, target: Point2) -> Result<f64, HeatmapError> {
    if predicted.values.is_empty() {
        return Err(HeatmapError::Empty);
    }
    if !predicted.contains(target) {
        return Err(HeatmapError::OutOfBounds {
            x: target.x,
            y: target.y,
            width: predicted.width,
            height: predicted.height,
        });
    }
    let mut max = f64::NEG_INFINITY;
    for (i, &v) in predicted.values.iter().enumerate() {
        if !v.is_finite() {
            return Err(HeatmapError::NonFinite {
                x: i % predicted.width,
                y: i / predicted.width,
            });
        }
        max = max.max(f64::from(v));
    }
    let sum: f64 = predicted.values.iter().map(|&v| (f64::from(v) - max).exp()).sum();
    let (tx, ty) = target.nearest_pixel(predicted.width, predicted.height);
    let target_score = f64::from(predicted.get(tx, ty)) - max;
    Ok(sum.ln() - target_score)
}
