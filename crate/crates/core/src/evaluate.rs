//! Three-tier evaluation of a cohort: localisation, angle agreement and
//! diagnostic screening, grouped by modality.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{agreement_report, BlandAltmanResult, IccResult, PairedSeries, ReliabilityBand, StatsError};
use crate::diagnostic::{confusion, rates, ConfusionCounts, ScreeningReport};
use crate::geometry::{anatomical_angles, GeometryError};
use crate::io::{BlandAltmanPoint, Cell};
use crate::localisation::{aggregate, landmark_errors, EvalError, LocalisationReport};
use crate::model::{AnglePair, Frame, FrameError, LandmarkId, LandmarkSet, Modality, SubjectRecord, Thresholds};

pub const REPORT_FORMAT: &str = "hipmetrics-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("no subjects to evaluate")]
    Empty,
    #[error("{0}: no predicted landmarks")]
    MissingPrediction(String),
    #[error("{subject}: {source}")]
    Subject {
        subject: String,
        #[source]
        source: EvalError,
    },
    #[error("{subject}: {landmark}: {source}")]
    Frame {
        subject: String,
        landmark: LandmarkId,
        #[source]
        source: FrameError,
    },
    #[error("{subject}: ground-truth {source}")]
    GroundTruthGeometry {
        subject: String,
        #[source]
        source: GeometryError,
    },
    #[error("{modality}: no subject has non-degenerate predicted angles")]
    NoAngles { modality: Modality },
    #[error("{modality}: {source}")]
    Stats {
        modality: Modality,
        #[source]
        source: StatsError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl EvaluateError {
    /// True when the inputs were well formed but a statistic could not be
    /// computed from them.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, EvaluateError::NoAngles { .. } | EvaluateError::Stats { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub thresholds: Thresholds,
    pub sdr_radii_mm: Vec<f64>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            sdr_radii_mm: vec![2.0, 3.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkCells {
    pub mean_re_mm: Cell,
    pub median_re_mm: Cell,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalisationSection {
    pub per_landmark: BTreeMap<LandmarkId, LandmarkCells>,
    pub overall_mean_re_mm: Cell,
    pub overall_median_re_mm: Cell,
    /// Percent of landmarks within each radius, keyed by the radius in mm.
    pub sdr: BTreeMap<String, Cell>,
}

impl From<&LocalisationReport> for LocalisationSection {
    fn from(r: &LocalisationReport) -> Self {
        Self {
            per_landmark: r
                .per_landmark
                .iter()
                .map(|(&id, s)| {
                    let cells = LandmarkCells {
                        mean_re_mm: s.mean_re_mm.into(),
                        median_re_mm: s.median_re_mm.into(),
                        n: s.n,
                    };
                    (id, cells)
                })
                .collect(),
            overall_mean_re_mm: r.overall_mean_re_mm.into(),
            overall_median_re_mm: r.overall_median_re_mm.into(),
            sdr: r
                .sdr
                .iter()
                .map(|e| (format!("{}", e.radius_mm), e.percent.into()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IccCells {
    pub icc: Cell,
    pub band: ReliabilityBand,
    pub ms_rows: f64,
    pub ms_cols: f64,
    pub ms_error: f64,
}

impl From<&IccResult> for IccCells {
    fn from(r: &IccResult) -> Self {
        Self {
            icc: r.icc.into(),
            band: r.band,
            ms_rows: r.ms_rows,
            ms_cols: r.ms_cols,
            ms_error: r.ms_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub subject_id: String,
    pub mean_deg: f64,
    pub difference_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanCells {
    pub bias: Cell,
    pub sd_diff: Cell,
    pub loa_low: Cell,
    pub loa_high: Cell,
    pub loa_half_width: Cell,
    pub slope: Option<Cell>,
    pub intercept: Option<Cell>,
    pub slope_p: Option<f64>,
    pub points: Vec<PointRow>,
    /// Full-precision result behind the cells; not serialised.
    #[serde(skip)]
    pub result: Option<BlandAltmanResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSection {
    pub n: usize,
    pub mae_deg: Cell,
    pub median_abs_diff_deg: Cell,
    pub icc: Option<IccCells>,
    pub bland_altman: Option<BlandAltmanCells>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningSection {
    pub accuracy: Option<Cell>,
    pub sensitivity: Option<Cell>,
    pub specificity: Option<Cell>,
    pub ppv: Option<Cell>,
    pub npv: Option<Cell>,
    pub counts: ConfusionCounts,
}

impl From<&ScreeningReport> for ScreeningSection {
    fn from(r: &ScreeningReport) -> Self {
        let c = |v: Option<f64>| v.map(Cell::new);
        Self {
            accuracy: c(r.accuracy),
            sensitivity: c(r.sensitivity),
            specificity: c(r.specificity),
            ppv: c(r.ppv),
            npv: c(r.npv),
            counts: r.counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub n_images: usize,
    pub localisation: LocalisationSection,
    pub alpha: AgreementSection,
    pub lce: AgreementSection,
    pub cam: ScreeningSection,
    pub pincer: ScreeningSection,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format: String,
    pub version: u32,
    pub settings: EvalSettings,
    pub cohorts: BTreeMap<Modality, CohortReport>,
}

impl EvaluationReport {
    /// Bland–Altman rows for one cohort and angle (`"alpha"` or `"lce"`).
    pub fn bland_altman_points(&self, modality: Modality, angle: &str) -> Option<Vec<BlandAltmanPoint>> {
        let cohort = self.cohorts.get(&modality)?;
        let section = match angle {
            "alpha" => &cohort.alpha,
            "lce" => &cohort.lce,
            _ => return None,
        };
        let ba = section.bland_altman.as_ref()?;
        Some(
            ba.points
                .iter()
                .map(|p| BlandAltmanPoint {
                    subject: p.subject_id.clone(),
                    mean: p.mean_deg,
                    difference: p.difference_deg,
                })
                .collect(),
        )
    }
}

/// Per-image measurements feeding the report.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectMeasurement {
    pub key: String,
    pub errors_mm: [f64; 4],
    /// `None` when a predicted angle is degenerate.
    pub predicted: Option<AnglePair>,
    pub ground_truth: AnglePair,
}

/// Puts both landmark sets into a common frame. Native points always map
/// into network space, so the native set is the one converted.
fn common_frame(
    pred: &LandmarkSet,
    gt: &LandmarkSet,
    record: &SubjectRecord,
) -> Result<(LandmarkSet, LandmarkSet), EvaluateError> {
    let to_net = |lm: &LandmarkSet| {
        lm.to_frame(Frame::Network512, &record.geometry)
            .map_err(|(landmark, source)| EvaluateError::Frame {
                subject: record.key().to_owned(),
                landmark,
                source,
            })
    };
    if pred.frame() == gt.frame() {
        Ok((*pred, *gt))
    } else {
        Ok((to_net(pred)?, to_net(gt)?))
    }
}

pub fn measure(record: &SubjectRecord, thresholds: Thresholds) -> Result<SubjectMeasurement, EvaluateError> {
    let key = record.key().to_owned();
    let pred = record
        .predicted
        .as_ref()
        .ok_or_else(|| EvaluateError::MissingPrediction(key.clone()))?;
    let (p, g) = common_frame(pred, &record.ground_truth, record)?;
    let errors_mm = landmark_errors(&p, &g, &record.geometry).map_err(|source| EvaluateError::Subject {
        subject: key.clone(),
        source,
    })?;
    let ground_truth = match record.clinician_angles {
        Some((alpha, lce)) => AnglePair::classify(alpha, lce, thresholds),
        None => anatomical_angles(&record.ground_truth, &record.geometry, thresholds).map_err(|source| {
            EvaluateError::GroundTruthGeometry {
                subject: key.clone(),
                source,
            }
        })?,
    };
    let predicted = anatomical_angles(pred, &record.geometry, thresholds).ok();
    Ok(SubjectMeasurement {
        key,
        errors_mm,
        predicted,
        ground_truth,
    })
}

fn agreement_section(
    modality: Modality,
    label: &str,
    keys: &[&str],
    pairs: Vec<(f64, f64)>,
    notices: &mut Vec<String>,
) -> Result<AgreementSection, EvaluateError> {
    let stats = |source| EvaluateError::Stats { modality, source };
    let series = PairedSeries::from_pairs(pairs).map_err(stats)?;
    let report = agreement_report(&series).map_err(stats)?;
    notices.extend(report.notices.iter().map(|n| format!("{label}: {n}")));
    let bland_altman = report.bland_altman.map(|ba| {
        let points = keys
            .iter()
            .zip(series.means().into_iter().zip(series.differences()))
            .map(|(k, (m, d))| PointRow {
                subject_id: (*k).to_owned(),
                mean_deg: m,
                difference_deg: d,
            })
            .collect();
        BlandAltmanCells {
            bias: ba.bias.into(),
            sd_diff: ba.sd_diff.into(),
            loa_low: ba.loa_low.into(),
            loa_high: ba.loa_high.into(),
            loa_half_width: ba.loa_half_width().into(),
            slope: ba.regression.map(|r| r.slope.into()),
            intercept: ba.regression.map(|r| r.intercept.into()),
            slope_p: ba.regression.and_then(|r| r.slope_p),
            points,
            result: Some(ba),
        }
    });
    Ok(AgreementSection {
        n: report.n,
        mae_deg: report.mae.into(),
        median_abs_diff_deg: report.median_abs_diff.into(),
        icc: report.icc.as_ref().map(IccCells::from),
        bland_altman,
    })
}

fn screening(pred: &[bool], gt: &[bool]) -> Result<ScreeningSection, EvaluateError> {
    Ok(ScreeningSection::from(&rates(confusion(pred, gt)?)))
}

/// Builds the report for one cohort from its per-image measurements.
pub fn cohort_report(
    modality: Modality,
    measurements: &[SubjectMeasurement],
    settings: &EvalSettings,
) -> Result<CohortReport, EvaluateError> {
    if measurements.is_empty() {
        return Err(EvaluateError::Empty);
    }
    let mut notices = Vec::new();
    let errors: Vec<[f64; 4]> = measurements.iter().map(|m| m.errors_mm).collect();
    let localisation = LocalisationSection::from(&aggregate(&errors, &settings.sdr_radii_mm)?);

    let scored: Vec<(&SubjectMeasurement, AnglePair)> = measurements
        .iter()
        .filter_map(|m| m.predicted.map(|p| (m, p)))
        .collect();
    for m in measurements.iter().filter(|m| m.predicted.is_none()) {
        notices.push(format!(
            "{}: predicted landmarks give a degenerate angle; excluded from agreement and screening",
            m.key
        ));
    }
    if scored.is_empty() {
        return Err(EvaluateError::NoAngles { modality });
    }
    let keys: Vec<&str> = scored.iter().map(|(m, _)| m.key.as_str()).collect();
    let alpha = agreement_section(
        modality,
        "alpha",
        &keys,
        scored
            .iter()
            .map(|(m, p)| (p.alpha_deg, m.ground_truth.alpha_deg))
            .collect(),
        &mut notices,
    )?;
    let lce = agreement_section(
        modality,
        "lce",
        &keys,
        scored
            .iter()
            .map(|(m, p)| (p.lce_deg, m.ground_truth.lce_deg))
            .collect(),
        &mut notices,
    )?;
    let flags = |f: fn(&AnglePair) -> bool| -> (Vec<bool>, Vec<bool>) {
        scored.iter().map(|(m, p)| (f(p), f(&m.ground_truth))).unzip()
    };
    let (cp, cg) = flags(|a| a.cam_positive);
    let (pp, pg) = flags(|a| a.pincer_positive);
    Ok(CohortReport {
        n_images: measurements.len(),
        localisation,
        alpha,
        lce,
        cam: screening(&cp, &cg)?,
        pincer: screening(&pp, &pg)?,
        notices,
    })
}

/// Evaluates every record, one cohort per modality present. Per-subject
/// measurement runs in parallel; results keep input order.
pub fn evaluate(records: &[SubjectRecord], settings: &EvalSettings) -> Result<EvaluationReport, EvaluateError> {
    if records.is_empty() {
        return Err(EvaluateError::Empty);
    }
    let measured: Vec<SubjectMeasurement> = records
        .par_iter()
        .map(|r| measure(r, settings.thresholds))
        .collect::<Result<_, _>>()?;
    let mut groups: BTreeMap<Modality, Vec<SubjectMeasurement>> = BTreeMap::new();
    for (r, m) in records.iter().zip(measured) {
        groups.entry(r.modality).or_default().push(m);
    }
    let cohorts = groups
        .into_iter()
        .map(|(modality, ms)| Ok((modality, cohort_report(modality, &ms, settings)?)))
        .collect::<Result<_, EvaluateError>>()?;
    Ok(EvaluationReport {
        format: REPORT_FORMAT.to_owned(),
        version: REPORT_VERSION,
        settings: settings.clone(),
        cohorts,
    })
}
