use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HeatmapError;
use crate::model::Point2;

/// Affine map `p -> A p + t` stored row-major as
/// `[a, b, tx, c, d, ty]`, i.e. `x' = a x + b y + tx`, `y' = c x + d y + ty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform2D {
    pub m: [f64; 6],
}

impl AffineTransform2D {
    pub const IDENTITY: Self = Self {
        m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    };

    pub fn new(m: [f64; 6]) -> Self {
        Self { m }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self::new([1.0, 0.0, dx, 0.0, 1.0, dy])
    }

    pub fn scaling(s: f64) -> Self {
        Self::new([s, 0.0, 0.0, 0.0, s, 0.0])
    }

    /// Rotation by `deg` degrees. With y pointing down, positive angles turn
    /// clockwise on screen.
    pub fn rotation_deg(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self::new([c, -s, 0.0, s, c, 0.0])
    }

    /// Horizontal shear by the angle `deg`: `x' = x + tan(deg) y`.
    pub fn shear_x_deg(deg: f64) -> Self {
        Self::new([1.0, deg.to_radians().tan(), 0.0, 0.0, 1.0, 0.0])
    }

    pub fn determinant(&self) -> f64 {
        self.m[0] * self.m[4] - self.m[1] * self.m[3]
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let [a, b, tx, c, d, ty] = self.m;
        Point2::new(a * p.x + b * p.y + tx, c * p.x + d * p.y + ty)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn then_after(&self, other: &Self) -> Self {
        let [a1, b1, t1, c1, d1, u1] = self.m;
        let [a2, b2, t2, c2, d2, u2] = other.m;
        Self::new([
            a1 * a2 + b1 * c2,
            a1 * b2 + b1 * d2,
            a1 * t2 + b1 * u2 + t1,
            c1 * a2 + d1 * c2,
            c1 * b2 + d1 * d2,
            c1 * t2 + d1 * u2 + u1,
        ])
    }

    pub fn inverse(&self) -> Result<Self, HeatmapError> {
        let det = self.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(HeatmapError::SingularTransform(det));
        }
        if self.is_identity() {
            return Ok(*self);
        }
        let [a, b, tx, c, d, ty] = self.m;
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        Ok(Self::new([ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)]))
    }

    /// Conjugates a linear map so it acts about `centre` instead of the origin.
    pub fn about(&self, centre: Point2) -> Self {
        Self::translation(centre.x, centre.y)
            .then_after(self)
            .then_after(&Self::translation(-centre.x, -centre.y))
    }
}

impl Default for AffineTransform2D {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Sampling ranges for the geometric augmentation. Each parameter is drawn
/// uniformly and independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRanges {
    pub scale: (f64, f64),
    /// Fraction of the image width / height.
    pub translate_frac: f64,
    pub rotation_deg: f64,
    pub shear_deg: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self {
            scale: (0.95, 1.05),
            translate_frac: 0.05,
            rotation_deg: 10.0,
            shear_deg: 5.0,
        }
    }
}

/// Drawn parameters of one augmented view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtaParams {
    pub scale: f64,
    pub rotation_deg: f64,
    pub shear_deg: f64,
    /// Translation in pixels.
    pub translate_x: f64,
    pub translate_y: f64,
}

impl TtaParams {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        rotation_deg: 0.0,
        shear_deg: 0.0,
        translate_x: 0.0,
        translate_y: 0.0,
    };

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, ranges: &AugmentRanges, width: usize, height: usize) -> Self {
        let sym = |rng: &mut R, r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let scale = if ranges.scale.0 < ranges.scale.1 {
            rng.random_range(ranges.scale.0..=ranges.scale.1)
        } else {
            ranges.scale.0
        };
        let rotation_deg = sym(rng, ranges.rotation_deg);
        let shear_deg = sym(rng, ranges.shear_deg);
        let translate_x = sym(rng, ranges.translate_frac * width as f64);
        let translate_y = sym(rng, ranges.translate_frac * height as f64);
        Self {
            scale,
            rotation_deg,
            shear_deg,
            translate_x,
            translate_y,
        }
    }

    /// Composes scale, rotation, shear and translation (applied in that
    /// order) about the centre of a `width x height` image.
    pub fn to_transform(&self, width: usize, height: usize) -> AffineTransform2D {
        if *self == Self::IDENTITY {
            return AffineTransform2D::IDENTITY;
        }
        let linear = AffineTransform2D::translation(self.translate_x, self.translate_y)
            .then_after(&AffineTransform2D::shear_x_deg(self.shear_deg))
            .then_after(&AffineTransform2D::rotation_deg(self.rotation_deg))
            .then_after(&AffineTransform2D::scaling(self.scale));
        let centre = Point2::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        linear.about(centre)
    }
}

/// Intensity jitter factors for image-space augmentation. Only sampled here;
/// applying them to pixels is left to the imaging side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityJitter {
    pub brightness: f64,
    pub contrast: f64,
    pub gamma: f64,
}

impl IntensityJitter {
    pub const BRIGHTNESS: f64 = 0.15;
    pub const CONTRAST: f64 = 0.20;
    pub const GAMMA: (f64, f64) = (0.85, 1.15);

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            brightness: 1.0 + rng.random_range(-Self::BRIGHTNESS..=Self::BRIGHTNESS),
            contrast: 1.0 + rng.random_range(-Self::CONTRAST..=Self::CONTRAST),
            gamma: rng.random_range(Self::GAMMA.0..=Self::GAMMA.1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_draws_are_identity() {
        assert_eq!(TtaParams::IDENTITY.to_transform(512, 512), AffineTransform2D::IDENTITY);
        let zero = TtaParams {
            scale: 1.0,
            rotation_deg: 0.0,
            shear_deg: 0.0,
            translate_x: 0.0,
            translate_y: 0.0,
        };
        let t = zero.to_transform(100, 60);
        let p = Point2::new(13.0, 47.0);
        assert_eq!(t.apply(p), p);
    }

    #[test]
    fn samples_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = AugmentRanges::default();
        for _ in 0..10_000 {
            let p = TtaParams::sample(&mut rng, &r, 512, 512);
            assert!((0.95..=1.05).contains(&p.scale));
            assert!(p.rotation_deg.abs() <= 10.0);
            assert!(p.shear_deg.abs() <= 5.0);
            assert!(p.translate_x.abs() <= 25.6 && p.translate_y.abs() <= 25.6);
            let j = IntensityJitter::sample(&mut rng);
            assert!((0.85..=1.15).contains(&j.brightness));
            assert!((0.8..=1.2).contains(&j.contrast));
            assert!((0.85..=1.15).contains(&j.gamma));
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = TtaParams::sample(&mut rng, &AugmentRanges::default(), 512, 512).to_transform(512, 512);
        let inv = t.inverse().unwrap();
        for _ in 0..100 {
            let p = Point2::new(rng.random_range(0.0..512.0), rng.random_range(0.0..512.0));
            let q = inv.apply(t.apply(p));
            assert!((q.x - p.x).abs() < 1e-6 && (q.y - p.y).abs() < 1e-6);
        }
    }

    #[test]
    fn centre_is_fixed_without_translation() {
        let p = TtaParams {
            scale: 1.03,
            rotation_deg: 7.0,
            shear_deg: -4.0,
            translate_x: 0.0,
            translate_y: 0.0,
        };
        let c = Point2::new(255.5, 255.5);
        let q = p.to_transform(512, 512).apply(c);
        assert!((q.x - c.x).abs() < 1e-9 && (q.y - c.y).abs() < 1e-9);
    }

    #[test]
    fn composition_order() {
        // scale then translate: (1,0) -> (2,0) -> (5,0)
        let t = AffineTransform2D::translation(3.0, 0.0).then_after(&AffineTransform2D::scaling(2.0));
        assert_eq!(t.apply(Point2::new(1.0, 0.0)), Point2::new(5.0, 0.0));
        let r = AffineTransform2D::rotation_deg(90.0).apply(Point2::new(1.0, 0.0));
        assert!(r.x.abs() < 1e-12 && (r.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_inverse() {
        let t = AffineTransform2D::new([1.0, 2.0, 0.0, 2.0, 4.0, 0.0]);
        assert!(matches!(t.inverse(), Err(HeatmapError::SingularTransform(_))));
    }
}
