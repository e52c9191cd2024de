//! Domain types shared by every stage of the pipeline.
//!
//! Coordinates follow raster convention: `x` is the column (growing to the
//! right), `y` is the row (growing downward) and the origin is the top-left
//! corner of the image. Any "up" direction in angle computations is therefore
//! `(0, -1)`.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of the square network input frame.
pub const NETWORK_SIZE: u32 = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("point ({x}, {y}) lies outside the {frame} frame ({width}x{height})")]
    OutOfBounds {
        x: f64,
        y: f64,
        frame: Frame,
        width: f64,
        height: f64,
    },
    #[error("point ({x}, {y}) falls in the padding region of the network frame")]
    InPadding { x: f64, y: f64 },
    #[error("non-finite coordinate ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetadataError {
    #[error("pixel spacing is missing from the image geometry")]
    MissingSpacing,
    #[error("scalar distance conversion needs isotropic spacing, got ({x}, {y}) mm/px")]
    AnisotropicSpacing { x: f64, y: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

/// The four hip landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LandmarkId {
    /// Femoral head centre.
    #[serde(rename = "FHC")]
    Fhc,
    /// Point on the femoral neck centreline.
    #[serde(rename = "NA")]
    Na,
    /// Lateral acetabular edge.
    #[serde(rename = "LAE")]
    Lae,
    /// Lateral cam point, where the head departs from sphericity.
    #[serde(rename = "LCP")]
    Lcp,
}

impl LandmarkId {
    pub const ALL: [LandmarkId; 4] = [LandmarkId::Fhc, LandmarkId::Na, LandmarkId::Lae, LandmarkId::Lcp];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LandmarkId::Fhc => "FHC",
            LandmarkId::Na => "NA",
            LandmarkId::Lae => "LAE",
            LandmarkId::Lcp => "LCP",
        }
    }
}

impl fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Displacement `other - self`.
    pub fn to(self, other: Point2) -> (f64, f64) {
        (other.x - self.x, other.y - self.y)
    }

    /// Nearest integer pixel inside a `width x height` grid.
    ///
    /// Exact half-way coordinates resolve to the lower index, and coordinates
    /// in `(w - 0.5, w)` clamp to the last column (likewise for rows).
    pub fn nearest_pixel(self, width: usize, height: usize) -> (usize, usize) {
        fn axis(v: f64, len: usize) -> usize {
            let r = (v - 0.5).ceil().max(0.0) as usize;
            r.min(len.saturating_sub(1))
        }
        (axis(self.x, width), axis(self.y, height))
    }
}

/// Coordinate frame in which a landmark set is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Native,
    #[serde(rename = "network512")]
    Network512,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::Native => f.write_str("native"),
            Frame::Network512 => f.write_str("network512"),
        }
    }
}

/// One point per landmark, all in the same frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSet {
    points: [Point2; 4],
    frame: Frame,
}

impl LandmarkSet {
    pub fn new(points: [Point2; 4], frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn from_fn(frame: Frame, mut f: impl FnMut(LandmarkId) -> Point2) -> Self {
        Self {
            points: LandmarkId::ALL.map(&mut f),
            frame,
        }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn points(&self) -> &[Point2; 4] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = (LandmarkId, Point2)> + '_ {
        LandmarkId::ALL.iter().map(move |&id| (id, self.points[id.index()]))
    }

    pub fn map(&self, frame: Frame, mut f: impl FnMut(Point2) -> Point2) -> Self {
        Self {
            points: self.points.map(&mut f),
            frame,
        }
    }

    /// Checks that every point is finite and inside the declared frame.
    pub fn validate(&self, geometry: &ImageGeometry) -> Result<(), (LandmarkId, FrameError)> {
        for (id, p) in self.iter() {
            geometry.check_in_frame(p, self.frame).map_err(|e| (id, e))?;
        }
        Ok(())
    }

    /// Re-expresses the set in `frame`.
    pub fn to_frame(&self, frame: Frame, geometry: &ImageGeometry) -> Result<Self, (LandmarkId, FrameError)> {
        if frame == self.frame {
            return Ok(*self);
        }
        let mut out = [Point2::default(); 4];
        for (id, p) in self.iter() {
            out[id.index()] = match frame {
                Frame::Network512 => geometry.native_to_network(p),
                Frame::Native => geometry.network_to_native(p),
            }
            .map_err(|e| (id, e))?;
        }
        Ok(Self::new(out, frame))
    }
}

impl Index<LandmarkId> for LandmarkSet {
    type Output = Point2;

    fn index(&self, id: LandmarkId) -> &Point2 {
        &self.points[id.index()]
    }
}

impl IndexMut<LandmarkId> for LandmarkSet {
    fn index_mut(&mut self, id: LandmarkId) -> &mut Point2 {
        &mut self.points[id.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Xray,
    Mri,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Xray => f.write_str("xray"),
            Modality::Mri => f.write_str("mri"),
        }
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xray" | "x-ray" => Ok(Modality::Xray),
            "mri" => Ok(Modality::Mri),
            other => Err(format!("unknown modality `{other}`")),
        }
    }
}

/// Native image size, physical spacing and the affine placement of the image
/// inside the 512x512 network frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGeometry {
    pub native_width: u32,
    pub native_height: u32,
    /// mm per pixel along x; absent when the source carried no spacing.
    pub pixel_spacing_x: Option<f64>,
    /// mm per pixel along y.
    pub pixel_spacing_y: Option<f64>,
    /// Through-plane spacing in mm (MRI only).
    pub slice_spacing: Option<f64>,
    pub resize_scale: f64,
    pub pad_left: f64,
    pub pad_top: f64,
}

impl ImageGeometry {
    /// Aspect-preserving fit of a `width x height` image into the network
    /// frame, centred with symmetric padding.
    pub fn fit_to_network(width: u32, height: u32, spacing: Option<(f64, f64)>) -> Self {
        let side = f64::from(NETWORK_SIZE);
        let scale = side / f64::from(width.max(height));
        Self {
            native_width: width,
            native_height: height,
            pixel_spacing_x: spacing.map(|s| s.0),
            pixel_spacing_y: spacing.map(|s| s.1),
            slice_spacing: None,
            resize_scale: scale,
            pad_left: (side - f64::from(width) * scale) / 2.0,
            pad_top: (side - f64::from(height) * scale) / 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), MetadataError> {
        let invalid = |msg: String| Err(MetadataError::InvalidGeometry(msg));
        if self.native_width == 0 || self.native_height == 0 {
            return invalid("native size must be non-zero".into());
        }
        if !(self.resize_scale.is_finite() && self.resize_scale > 0.0) {
            return invalid(format!("resize_scale must be > 0, got {}", self.resize_scale));
        }
        for (name, v) in [
            ("pixel_spacing_x", self.pixel_spacing_x),
            ("pixel_spacing_y", self.pixel_spacing_y),
            ("slice_spacing", self.slice_spacing),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return invalid(format!("{name} must be > 0, got {v}"));
                }
            }
        }
        if self.pixel_spacing_x.is_some() != self.pixel_spacing_y.is_some() {
            return invalid("pixel spacing needs both x and y".into());
        }
        if !(self.pad_left.is_finite() && self.pad_left >= 0.0 && self.pad_top.is_finite() && self.pad_top >= 0.0) {
            return invalid("padding must be finite and non-negative".into());
        }
        let side = f64::from(NETWORK_SIZE) + 1e-9;
        let right = self.pad_left + f64::from(self.native_width) * self.resize_scale;
        let bottom = self.pad_top + f64::from(self.native_height) * self.resize_scale;
        if right > side || bottom > side {
            return invalid(format!(
                "resized image extends to ({right}, {bottom}), beyond the network frame"
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> Result<(f64, f64), MetadataError> {
        match (self.pixel_spacing_x, self.pixel_spacing_y) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(MetadataError::MissingSpacing),
        }
    }

    pub fn check_in_frame(&self, p: Point2, frame: Frame) -> Result<(), FrameError> {
        if !p.is_finite() {
            return Err(FrameError::NonFinite { x: p.x, y: p.y });
        }
        let (w, h) = match frame {
            Frame::Native => (f64::from(self.native_width), f64::from(self.native_height)),
            Frame::Network512 => (f64::from(NETWORK_SIZE), f64::from(NETWORK_SIZE)),
        };
        if p.x < 0.0 || p.y < 0.0 || p.x >= w || p.y >= h {
            return Err(FrameError::OutOfBounds {
                x: p.x,
                y: p.y,
                frame,
                width: w,
                height: h,
            });
        }
        Ok(())
    }

    pub fn native_to_network(&self, p: Point2) -> Result<Point2, FrameError> {
        self.check_in_frame(p, Frame::Native)?;
        let q = Point2::new(
            p.x * self.resize_scale + self.pad_left,
            p.y * self.resize_scale + self.pad_top,
        );
        // pad + w*scale may equal 512 exactly; keep the result half-open.
        let max = f64::from(NETWORK_SIZE).next_down();
        Ok(Point2::new(q.x.min(max), q.y.min(max)))
    }

    pub fn network_to_native(&self, p: Point2) -> Result<Point2, FrameError> {
        self.check_in_frame(p, Frame::Network512)?;
        let x = (p.x - self.pad_left) / self.resize_scale;
        let y = (p.y - self.pad_top) / self.resize_scale;
        let (w, h) = (f64::from(self.native_width), f64::from(self.native_height));
        // Rounding in the forward map can push a point a hair past the edge.
        let tol = 1e-9 * w.max(h);
        if x < -tol || y < -tol || x >= w + tol || y >= h + tol {
            return Err(FrameError::InPadding { x: p.x, y: p.y });
        }
        Ok(Point2::new(x.clamp(0.0, w.next_down()), y.clamp(0.0, h.next_down())))
    }

    /// Converts a scalar pixel distance measured in `frame` to millimetres in
    /// the native frame. Requires isotropic spacing.
    pub fn pixels_to_mm(&self, distance: f64, frame: Frame) -> Result<f64, MetadataError> {
        let (sx, sy) = self.spacing()?;
        if sx != sy {
            return Err(MetadataError::AnisotropicSpacing { x: sx, y: sy });
        }
        Ok(self.native_pixels(distance, frame) * sx)
    }

    /// Converts a displacement measured in `frame` to a millimetre distance,
    /// scaling each axis by its own spacing before taking the norm.
    pub fn displacement_to_mm(&self, dx: f64, dy: f64, frame: Frame) -> Result<f64, MetadataError> {
        let (sx, sy) = self.spacing()?;
        let dx = self.native_pixels(dx, frame) * sx;
        let dy = self.native_pixels(dy, frame) * sy;
        Ok(dx.hypot(dy))
    }

    /// Physical (mm) displacement when spacing is present, otherwise the
    /// displacement in native pixels.
    pub fn physical_displacement(&self, dx: f64, dy: f64, frame: Frame) -> (f64, f64) {
        let (sx, sy) = self.spacing().unwrap_or((1.0, 1.0));
        (self.native_pixels(dx, frame) * sx, self.native_pixels(dy, frame) * sy)
    }

    fn native_pixels(&self, d: f64, frame: Frame) -> f64 {
        match frame {
            Frame::Native => d,
            Frame::Network512 => d / self.resize_scale,
        }
    }
}

/// Thresholds above which a measurement screens positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub alpha_deg: f64,
    pub lce_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            alpha_deg: 65.0,
            lce_deg: 40.0,
        }
    }
}

/// α- and LCE-angle of one hip with the derived morphology flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub alpha_deg: f64,
    pub lce_deg: f64,
    pub cam_positive: bool,
    pub pincer_positive: bool,
}

impl AnglePair {
    /// Flags use strict inequality: a value equal to the threshold is negative.
    pub fn classify(alpha_deg: f64, lce_deg: f64, thresholds: Thresholds) -> Self {
        Self {
            alpha_deg,
            lce_deg,
            cam_positive: alpha_deg > thresholds.alpha_deg,
            pincer_positive: lce_deg > thresholds.lce_deg,
        }
    }
}

/// One annotated image of one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    /// Image key; several images may share a `subject_id`.
    pub image: Option<String>,
    pub modality: Modality,
    pub geometry: ImageGeometry,
    pub ground_truth: LandmarkSet,
    pub predicted: Option<LandmarkSet>,
    /// Clinician-measured angles, if recorded separately from the landmarks.
    pub clinician_angles: Option<(f64, f64)>,
}

impl SubjectRecord {
    /// Unique key of the image this record describes.
    pub fn key(&self) -> &str {
        self.image.as_deref().unwrap_or(&self.subject_id)
    }
}
