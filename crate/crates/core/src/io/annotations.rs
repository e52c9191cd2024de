//! Versioned JSON annotation documents.
//!
//! ```json
//! {
//!   "format": "hipmetrics-annotations",
//!   "version": 1,
//!   "subjects": [{
//!     "subject_id": "P001",
//!     "image": "P001_t0",
//!     "modality": "xray",
//!     "geometry": { "native_width": 2048, "native_height": 1800,
//!                   "pixel_spacing_x": 0.15, "pixel_spacing_y": 0.15 },
//!     "ground_truth": { "frame": "native", "FHC": [812.0, 903.5], "NA": [...],
//!                       "LAE": [...], "LCP": [...] },
//!     "predicted": { "frame": "network512", ... },
//!     "clinician_angles": { "alpha_deg": 61.2, "lce_deg": 33.0 }
//!   }]
//! }
//! ```
//!
//! `resize_scale`, `pad_left` and `pad_top` may be omitted together, in which
//! case the image is fitted into the network frame with centred padding.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::model::{Frame, ImageGeometry, LandmarkId, LandmarkSet, Modality, Point2, SubjectRecord};

pub const ANNOTATION_FORMAT: &str = "hipmetrics-annotations";
pub const ANNOTATION_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    /// Unknown fields are reported as warnings.
    #[default]
    Lenient,
    /// Unknown fields are errors.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotations {
    pub records: Vec<SubjectRecord>,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<String>,
    version: u64,
    subjects: Vec<RawSubject>,
}

#[derive(Serialize, Deserialize)]
struct RawSubject {
    subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<String>,
    modality: Modality,
    geometry: RawGeometry,
    ground_truth: RawLandmarks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicted: Option<RawLandmarks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clinician_angles: Option<RawAngles>,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    native_width: u32,
    native_height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pixel_spacing_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pixel_spacing_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slice_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resize_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pad_left: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pad_top: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawLandmarks {
    frame: Frame,
    #[serde(rename = "FHC", default)]
    fhc: Option<[f64; 2]>,
    #[serde(rename = "NA", default)]
    na: Option<[f64; 2]>,
    #[serde(rename = "LAE", default)]
    lae: Option<[f64; 2]>,
    #[serde(rename = "LCP", default)]
    lcp: Option<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct RawAngles {
    alpha_deg: f64,
    lce_deg: f64,
}

impl RawLandmarks {
    fn from_set(lm: &LandmarkSet) -> Self {
        let p = |id| Some([lm[id].x, lm[id].y]);
        Self {
            frame: lm.frame(),
            fhc: p(LandmarkId::Fhc),
            na: p(LandmarkId::Na),
            lae: p(LandmarkId::Lae),
            lcp: p(LandmarkId::Lcp),
        }
    }

    fn into_set(self, subject: &str, field: &str) -> Result<LandmarkSet, FormatError> {
        let slots = [self.fhc, self.na, self.lae, self.lcp];
        let mut pts = [Point2::default(); 4];
        for (id, slot) in LandmarkId::ALL.into_iter().zip(slots) {
            let [x, y] = slot.ok_or_else(|| {
                FormatError::invalid(
                    Some(subject),
                    format!("{field}.{id}"),
                    format!("missing {id} coordinate"),
                )
            })?;
            pts[id.index()] = Point2::new(x, y);
        }
        Ok(LandmarkSet::new(pts, self.frame))
    }
}

impl RawGeometry {
    fn from_geometry(g: &ImageGeometry) -> Self {
        Self {
            native_width: g.native_width,
            native_height: g.native_height,
            pixel_spacing_x: g.pixel_spacing_x,
            pixel_spacing_y: g.pixel_spacing_y,
            slice_spacing: g.slice_spacing,
            resize_scale: Some(g.resize_scale),
            pad_left: Some(g.pad_left),
            pad_top: Some(g.pad_top),
        }
    }

    fn into_geometry(self, subject: &str) -> Result<ImageGeometry, FormatError> {
        let fitted = ImageGeometry::fit_to_network(self.native_width.max(1), self.native_height.max(1), None);
        let placement = match (self.resize_scale, self.pad_left, self.pad_top) {
            (Some(s), Some(l), Some(t)) => (s, l, t),
            (None, None, None) => (fitted.resize_scale, fitted.pad_left, fitted.pad_top),
            _ => {
                return Err(FormatError::invalid(
                    Some(subject),
                    "geometry",
                    "resize_scale, pad_left and pad_top must be given together or not at all",
                ))
            }
        };
        let g = ImageGeometry {
            native_width: self.native_width,
            native_height: self.native_height,
            pixel_spacing_x: self.pixel_spacing_x,
            pixel_spacing_y: self.pixel_spacing_y,
            slice_spacing: self.slice_spacing,
            resize_scale: placement.0,
            pad_left: placement.1,
            pad_top: placement.2,
        };
        g.validate()
            .map_err(|e| FormatError::invalid(Some(subject), "geometry", e.to_string()))?;
        Ok(g)
    }
}

fn json_error(e: serde_json::Error) -> FormatError {
    FormatError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates an annotation document.
pub fn parse_annotations(text: &str, mode: ReadMode) -> Result<Annotations, FormatError> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: Document =
        serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string())).map_err(json_error)?;
    de.end().map_err(json_error)?;

    if mode == ReadMode::Strict {
        if let Some(first) = unknown.first() {
            return Err(FormatError::UnknownField(first.clone()));
        }
    }
    let mut warnings: Vec<String> = unknown
        .into_iter()
        .map(|p| format!("ignoring unknown field `{p}`"))
        .collect();

    if let Some(fmt) = doc.format.as_deref() {
        if fmt != ANNOTATION_FORMAT {
            return Err(FormatError::invalid(
                None,
                "format",
                format!("expected `{ANNOTATION_FORMAT}`, got `{fmt}`"),
            ));
        }
    }
    if doc.version != ANNOTATION_VERSION {
        return Err(FormatError::UnsupportedVersion {
            what: "annotation",
            found: doc.version,
        });
    }

    let mut records = Vec::with_capacity(doc.subjects.len());
    let mut keys = HashSet::new();
    let mut ids = HashSet::new();
    for raw in doc.subjects {
        let record = validate_subject(raw)?;
        if !keys.insert(record.key().to_owned()) {
            return Err(FormatError::invalid(
                Some(&record.subject_id),
                "image",
                format!("image key `{}` is not unique", record.key()),
            ));
        }
        if !ids.insert(record.subject_id.clone()) {
            warnings.push(format!(
                "subject `{}` has several images; each image is evaluated as its own subject",
                record.subject_id
            ));
        }
        records.push(record);
    }
    warnings.dedup();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Annotations { records, warnings })
}

fn validate_subject(raw: RawSubject) -> Result<SubjectRecord, FormatError> {
    let id = raw.subject_id;
    if id.is_empty() {
        return Err(FormatError::invalid(None, "subject_id", "must not be empty"));
    }
    let geometry = raw.geometry.into_geometry(&id)?;
    let ground_truth = raw.ground_truth.into_set(&id, "ground_truth")?;
    check_points(&id, "ground_truth", &ground_truth, &geometry)?;
    let predicted = match raw.predicted {
        Some(p) => {
            let set = p.into_set(&id, "predicted")?;
            check_points(&id, "predicted", &set, &geometry)?;
            Some(set)
        }
        None => None,
    };
    let clinician_angles = match raw.clinician_angles {
        Some(a) => {
            for (name, v) in [("alpha_deg", a.alpha_deg), ("lce_deg", a.lce_deg)] {
                if !(v.is_finite() && (0.0..=180.0).contains(&v)) {
                    return Err(FormatError::invalid(
                        Some(&id),
                        format!("clinician_angles.{name}"),
                        format!("{v} is outside [0, 180]"),
                    ));
                }
            }
            Some((a.alpha_deg, a.lce_deg))
        }
        None => None,
    };
    Ok(SubjectRecord {
        subject_id: id,
        image: raw.image,
        modality: raw.modality,
        geometry,
        ground_truth,
        predicted,
        clinician_angles,
    })
}

fn check_points(subject: &str, field: &str, lm: &LandmarkSet, g: &ImageGeometry) -> Result<(), FormatError> {
    lm.validate(g)
        .map_err(|(id, e)| FormatError::invalid(Some(subject), format!("{field}.{id}"), e.to_string()))
}

pub fn read_annotations(path: impl AsRef<Path>, mode: ReadMode) -> Result<Annotations, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_annotations(&text, mode)
}

pub fn to_json_string(records: &[SubjectRecord]) -> Result<String, FormatError> {
    let doc = Document {
        format: Some(ANNOTATION_FORMAT.to_owned()),
        version: ANNOTATION_VERSION,
        subjects: records
            .iter()
            .map(|r| RawSubject {
                subject_id: r.subject_id.clone(),
                image: r.image.clone(),
                modality: r.modality,
                geometry: RawGeometry::from_geometry(&r.geometry),
                ground_truth: RawLandmarks::from_set(&r.ground_truth),
                predicted: r.predicted.as_ref().map(RawLandmarks::from_set),
                clinician_angles: r
                    .clinician_angles
                    .map(|(alpha_deg, lce_deg)| RawAngles { alpha_deg, lce_deg }),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn write_annotations(path: impl AsRef<Path>, records: &[SubjectRecord]) -> Result<(), FormatError> {
    let path = path.as_ref();
    std::fs::write(path, to_json_string(records)?).map_err(|e| FormatError::io(path, e))
}
