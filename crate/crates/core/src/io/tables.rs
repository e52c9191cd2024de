//! Delimited-text outputs: split manifests and Bland–Altman plot data.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::agreement::BlandAltmanResult;
use crate::split::Partition;

/// One image of a split manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub subject_id: String,
    pub image: String,
    pub partition: Partition,
}

pub fn write_manifest<W: Write>(out: W, rows: &[ManifestRow]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| FormatError::io("<manifest>", e))?;
    Ok(())
}

pub fn read_manifest<R: Read>(input: R) -> Result<Vec<ManifestRow>, FormatError> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<ManifestRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlandAltmanPoint {
    pub subject: String,
    pub mean: f64,
    pub difference: f64,
}

#[derive(Serialize)]
struct BaRow<'a> {
    kind: &'a str,
    subject_id: &'a str,
    mean_deg: Option<f64>,
    difference_deg: Option<f64>,
    value: Option<f64>,
}

/// Writes per-subject `point` rows followed by summary rows (`bias`,
/// `sd_diff`, `loa_low`, `loa_high`, and when available `slope`,
/// `intercept`, `slope_p`). Unused columns are left empty.
pub fn write_bland_altman_csv<W: Write>(
    out: W,
    points: &[BlandAltmanPoint],
    summary: &BlandAltmanResult,
) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(BaRow {
            kind: "point",
            subject_id: &p.subject,
            mean_deg: Some(p.mean),
            difference_deg: Some(p.difference),
            value: None,
        })?;
    }
    let mut summary_rows = vec![
        ("n", Some(summary.n as f64)),
        ("bias", Some(summary.bias)),
        ("sd_diff", Some(summary.sd_diff)),
        ("loa_low", Some(summary.loa_low)),
        ("loa_high", Some(summary.loa_high)),
    ];
    if let Some(reg) = summary.regression {
        summary_rows.extend([
            ("slope", Some(reg.slope)),
            ("intercept", Some(reg.intercept)),
            ("slope_p", reg.slope_p),
        ]);
    }
    for (kind, value) in summary_rows {
        w.serialize(BaRow {
            kind,
            subject_id: "",
            mean_deg: None,
            difference_deg: None,
            value,
        })?;
    }
    w.flush().map_err(|e| FormatError::io("<bland-altman>", e))?;
    Ok(())
}
