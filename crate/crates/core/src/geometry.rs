//! α-angle and lateral centre-edge angle from the four hip landmarks.
//!
//! Both angles are unsigned. Because the image frame is y-down, the superior
//! (vertical) reference direction used for the LCE angle is `(0, -1)`.

use thiserror::Error;

use crate::model::{AnglePair, ImageGeometry, LandmarkId, LandmarkSet, Thresholds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{from}->{to} has zero length")]
    Degenerate { from: LandmarkId, to: LandmarkId },
}

const UP: (f64, f64) = (0.0, -1.0);

/// Angle in degrees between two non-zero vectors, in `[0, 180]`.
///
/// Same value as the arccos of the normalised dot product, but taken as
/// `atan2(|u x v|, u . v)`, which stays accurate for near-parallel vectors.
pub fn angle_between(u: (f64, f64), v: (f64, f64)) -> Option<f64> {
    let finite = |w: (f64, f64)| w.0.is_finite() && w.1.is_finite();
    if u == (0.0, 0.0) || v == (0.0, 0.0) || !finite(u) || !finite(v) {
        return None;
    }
    let cross = u.0 * v.1 - u.1 * v.0;
    let dot = u.0 * v.0 + u.1 * v.1;
    Some(cross.abs().atan2(dot).to_degrees())
}

fn vector(lm: &LandmarkSet, to: LandmarkId) -> (f64, f64) {
    lm[LandmarkId::Fhc].to(lm[to])
}

fn degenerate(to: LandmarkId) -> GeometryError {
    GeometryError::Degenerate {
        from: LandmarkId::Fhc,
        to,
    }
}

/// Angle between the neck axis FHC→NA and FHC→LCP.
pub fn alpha_angle(lm: &LandmarkSet) -> Result<f64, GeometryError> {
    alpha_from(vector(lm, LandmarkId::Na), vector(lm, LandmarkId::Lcp))
}

/// Angle between the vertical axis and FHC→LAE.
pub fn lce_angle(lm: &LandmarkSet) -> Result<f64, GeometryError> {
    lce_from(vector(lm, LandmarkId::Lae))
}

fn alpha_from(neck: (f64, f64), cam: (f64, f64)) -> Result<f64, GeometryError> {
    if neck == (0.0, 0.0) {
        return Err(degenerate(LandmarkId::Na));
    }
    angle_between(neck, cam).ok_or_else(|| degenerate(LandmarkId::Lcp))
}

fn lce_from(edge: (f64, f64)) -> Result<f64, GeometryError> {
    angle_between(UP, edge).ok_or_else(|| degenerate(LandmarkId::Lae))
}

pub fn classify(alpha_deg: f64, lce_deg: f64, thresholds: Thresholds) -> AnglePair {
    AnglePair::classify(alpha_deg, lce_deg, thresholds)
}

/// Both angles and their flags, measured on raw pixel displacements.
pub fn angles_for(lm: &LandmarkSet, thresholds: Thresholds) -> Result<AnglePair, GeometryError> {
    Ok(classify(alpha_angle(lm)?, lce_angle(lm)?, thresholds))
}

/// Both angles measured on physical displacements: frame scaling is undone
/// and per-axis pixel spacing applied before any angle is taken, so
/// anisotropic pixels do not skew the result.
pub fn anatomical_angles(
    lm: &LandmarkSet,
    geometry: &ImageGeometry,
    thresholds: Thresholds,
) -> Result<AnglePair, GeometryError> {
    let phys = |to| {
        let (dx, dy) = vector(lm, to);
        geometry.physical_displacement(dx, dy, lm.frame())
    };
    let alpha = alpha_from(phys(LandmarkId::Na), phys(LandmarkId::Lcp))?;
    let lce = lce_from(phys(LandmarkId::Lae))?;
    Ok(classify(alpha, lce, thresholds))
}
