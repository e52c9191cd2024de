use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AffineTransform2D, AugmentRanges, Heatmap, HeatmapError, TtaParams};
use crate::model::{Frame, LandmarkSet, Point2};

/// Per-landmark heatmaps of one view of an image, together with the
/// transform mapping original network-frame coordinates into this view.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    pub heatmaps: Vec<Heatmap>,
    pub view_transform: AffineTransform2D,
}

impl HeatmapStack {
    pub fn new(heatmaps: Vec<Heatmap>, view_transform: AffineTransform2D) -> Result<Self, HeatmapError> {
        let stack = Self {
            heatmaps,
            view_transform,
        };
        stack.check()?;
        Ok(stack)
    }

    pub fn identity(heatmaps: Vec<Heatmap>) -> Result<Self, HeatmapError> {
        Self::new(heatmaps, AffineTransform2D::IDENTITY)
    }

    /// `(landmarks, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        let (h, w) = self.heatmaps.first().map_or((0, 0), |m| (m.height(), m.width()));
        (self.heatmaps.len(), h, w)
    }

    fn check(&self) -> Result<(), HeatmapError> {
        if self.heatmaps.is_empty() {
            return Err(HeatmapError::Empty);
        }
        let (_, h, w) = self.shape();
        for (i, m) in self.heatmaps.iter().enumerate() {
            if (m.height(), m.width()) != (h, w) {
                return Err(HeatmapError::ShapeMismatch {
                    index: i,
                    expected: (self.heatmaps.len(), h, w),
                    got: (self.heatmaps.len(), m.height(), m.width()),
                });
            }
        }
        let det = self.view_transform.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(HeatmapError::SingularTransform(det));
        }
        Ok(())
    }

    /// Argmax of every heatmap, read as a landmark set in the network frame.
    /// Only meaningful for stacks in the original (identity) frame.
    pub fn decode_landmarks(&self) -> Result<LandmarkSet, HeatmapError> {
        if self.heatmaps.len() != 4 {
            return Err(HeatmapError::SizeMismatch {
                expected: 4,
                got: self.heatmaps.len(),
            });
        }
        let mut pts = [Point2::default(); 4];
        for (slot, hm) in pts.iter_mut().zip(&self.heatmaps) {
            *slot = super::decode_argmax(hm)?;
        }
        Ok(LandmarkSet::new(pts, Frame::Network512))
    }
}

/// Resamples `hm` so that content at `p` moves to `t(p)`.
///
/// Each output pixel pulls from `t⁻¹` of its position with bilinear weights;
/// source samples outside the grid count as zero.
pub fn warp_heatmap(hm: &Heatmap, t: &AffineTransform2D) -> Result<Heatmap, HeatmapError> {
    let inv = t.inverse()?;
    let (w, h) = (hm.width(), hm.height());
    let src = hm.values();
    let sample = |x: isize, y: isize| -> Option<f64> {
        (x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h).then(|| f64::from(src[y as usize * w + x as usize]))
    };
    let mut out = Heatmap::zeros(w, h);
    for (row, dst) in out.values_mut().chunks_exact_mut(w.max(1)).enumerate() {
        for (col, v) in dst.iter_mut().enumerate() {
            let p = inv.apply(Point2::new(col as f64, row as f64));
            if !(p.x > -1.0 && p.y > -1.0 && p.x < w as f64 && p.y < h as f64) {
                continue;
            }
            let (x0, y0) = (p.x.floor(), p.y.floor());
            let (fx, fy) = (p.x - x0, p.y - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let mut acc = 0.0f64;
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                    let weight = wx * wy;
                    if weight == 0.0 {
                        continue;
                    }
                    if let Some(s) = sample(x0 + dx, y0 + dy) {
                        acc += weight * s;
                    }
                }
            }
            *v = acc as f32;
        }
    }
    Ok(out)
}

/// Maps every view back to the original frame and averages pixelwise.
pub fn tta_aggregate(views: &[HeatmapStack]) -> Result<HeatmapStack, HeatmapError> {
    let first = views.first().ok_or(HeatmapError::NoViews)?;
    let shape = first.shape();
    for (i, v) in views.iter().enumerate() {
        v.check()?;
        if v.shape() != shape {
            return Err(HeatmapError::ShapeMismatch {
                index: i,
                expected: shape,
                got: v.shape(),
            });
        }
    }
    let (k, h, w) = shape;
    let mut sums = vec![vec![0.0f64; h * w]; k];
    for view in views {
        let back = view.view_transform.inverse()?;
        for (acc, hm) in sums.iter_mut().zip(&view.heatmaps) {
            let restored;
            let values = if back.is_identity() {
                hm.values()
            } else {
                restored = warp_heatmap(hm, &back)?;
                restored.values()
            };
            for (a, &v) in acc.iter_mut().zip(values) {
                *a += f64::from(v);
            }
        }
    }
    let n = views.len() as f64;
    let heatmaps = sums
        .into_iter()
        .map(|acc| Heatmap::from_values(w, h, acc.into_iter().map(|s| (s / n) as f32).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    HeatmapStack::identity(heatmaps)
}

/// One augmentation transform for a `width x height` frame, fully
/// determined by `seed`.
pub fn sample_tta_transform(seed: u64, width: usize, height: usize) -> AffineTransform2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TtaParams::sample(&mut rng, &AugmentRanges::default(), width, height).to_transform(width, height)
}

/// `count` independent views; view `i` draws from its own ChaCha stream so the
/// result does not depend on how many views are requested.
pub fn sample_tta_views(
    seed: u64,
    count: usize,
    ranges: &AugmentRanges,
    width: usize,
    height: usize,
) -> Vec<(TtaParams, AffineTransform2D)> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let p = TtaParams::sample(&mut rng, ranges, width, height);
            (p, p.to_transform(width, height))
        })
        .collect()
}
