//! Radial errors, per-landmark aggregation and success detection rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Frame, ImageGeometry, LandmarkId, LandmarkSet, MetadataError, Point2};
use crate::stats::{mean, median};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("predicted points are in the {pred} frame but ground truth is in the {gt} frame")]
    FrameMismatch { pred: Frame, gt: Frame },
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error("no subjects to evaluate")]
    Empty,
    #[error("radial error for {0} is not a finite non-negative number")]
    BadError(LandmarkId),
    #[error("flag series have different lengths ({pred} predicted, {gt} ground truth)")]
    LengthMismatch { pred: usize, gt: usize },
}

/// Radial error in mm between two points expressed in `frame`.
pub fn radial_error(pred: Point2, gt: Point2, frame: Frame, geometry: &ImageGeometry) -> Result<f64, EvalError> {
    let (dx, dy) = gt.to(pred);
    Ok(geometry.displacement_to_mm(dx, dy, frame)?)
}

/// Radial error of each landmark, in mm.
pub fn landmark_errors(pred: &LandmarkSet, gt: &LandmarkSet, geometry: &ImageGeometry) -> Result<[f64; 4], EvalError> {
    if pred.frame() != gt.frame() {
        return Err(EvalError::FrameMismatch {
            pred: pred.frame(),
            gt: gt.frame(),
        });
    }
    let mut out = [0.0; 4];
    for id in LandmarkId::ALL {
        out[id.index()] = radial_error(pred[id], gt[id], gt.frame(), geometry)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkStats {
    pub mean_re_mm: f64,
    pub median_re_mm: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdrEntry {
    pub radius_mm: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalisationReport {
    pub per_landmark: BTreeMap<LandmarkId, LandmarkStats>,
    /// Unweighted mean of the four per-landmark means.
    pub overall_mean_re_mm: f64,
    /// Median of all pooled errors.
    pub overall_median_re_mm: f64,
    /// Sorted by radius.
    pub sdr: Vec<SdrEntry>,
}

/// Percentage of `errors` at or below `radius`.
pub fn success_rate(errors: &[f64], radius: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let hits = errors.iter().filter(|&&e| e <= radius).count();
    100.0 * hits as f64 / errors.len() as f64
}

/// `errors[s][k]` is the error of landmark `k` on subject `s`.
pub fn aggregate(errors: &[[f64; 4]], radii: &[f64]) -> Result<LocalisationReport, EvalError> {
    if errors.is_empty() {
        return Err(EvalError::Empty);
    }
    for row in errors {
        for id in LandmarkId::ALL {
            let e = row[id.index()];
            if !(e.is_finite() && e >= 0.0) {
                return Err(EvalError::BadError(id));
            }
        }
    }
    let per_landmark: BTreeMap<_, _> = LandmarkId::ALL
        .iter()
        .map(|&id| {
            let col: Vec<f64> = errors.iter().map(|r| r[id.index()]).collect();
            let stats = LandmarkStats {
                mean_re_mm: mean(&col),
                median_re_mm: median(&col),
                n: col.len(),
            };
            (id, stats)
        })
        .collect();
    let means: Vec<f64> = per_landmark.values().map(|s| s.mean_re_mm).collect();
    let pooled: Vec<f64> = errors.iter().flatten().copied().collect();
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    let sdr = radii
        .into_iter()
        .map(|r| SdrEntry {
            radius_mm: r,
            percent: success_rate(&pooled, r),
        })
        .collect();
    Ok(LocalisationReport {
        per_landmark,
        overall_mean_re_mm: mean(&means),
        overall_median_re_mm: median(&pooled),
        sdr,
    })
}
