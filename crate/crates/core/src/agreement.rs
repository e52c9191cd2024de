//! Agreement between two raters on a continuous measurement: absolute-error
//! summaries, ICC(2,1) and Bland–Altman analysis.
//!
//! Throughout, rater A is the model and rater B the clinician, so every
//! difference is `predicted - ground truth`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{linear_fit, mean, median, sample_sd};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("series needs at least {needed} pairs, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("series lengths differ ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("table row {row} has {got} ratings, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),
    #[error("sample is empty")]
    EmptySample,
}

/// Paired measurements of the same subjects by two raters.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PairedSeries {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, StatsError> {
        if a.len() != b.len() {
            return Err(StatsError::LengthMismatch { a: a.len(), b: b.len() });
        }
        if let Some(i) = a.iter().zip(&b).position(|(x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(StatsError::NonFinite(i));
        }
        Ok(Self { a, b })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, StatsError> {
        let (a, b) = pairs.into_iter().unzip();
        Self::new(a, b)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn rater_a(&self) -> &[f64] {
        &self.a
    }

    pub fn rater_b(&self) -> &[f64] {
        &self.b
    }

    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| (x + y) / 2.0).collect()
    }

    fn require(&self, needed: usize) -> Result<(), StatsError> {
        if self.len() < needed {
            Err(StatsError::TooFew {
                needed,
                got: self.len(),
            })
        } else {
            Ok(())
        }
    }
}

pub fn mae(s: &PairedSeries) -> Result<f64, StatsError> {
    s.require(1)?;
    Ok(mean(&s.differences().iter().map(|d| d.abs()).collect::<Vec<_>>()))
}

pub fn median_abs_diff(s: &PairedSeries) -> Result<f64, StatsError> {
    s.require(1)?;
    Ok(median(&s.differences().iter().map(|d| d.abs()).collect::<Vec<_>>()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReliabilityBand {
    Poor,
    Fair,
    Good,
    Excellent,
}

impl fmt::Display for ReliabilityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ReliabilityBand::Poor => "poor",
            ReliabilityBand::Fair => "fair",
            ReliabilityBand::Good => "good",
            ReliabilityBand::Excellent => "excellent",
        };
        f.write_str(s)
    }
}

/// Cicchetti bands with half-open intervals: `[0.40, 0.60)` is fair,
/// `[0.60, 0.75)` good and anything from 0.75 up excellent.
pub fn reliability_band(icc: f64) -> ReliabilityBand {
    if icc < 0.40 {
        ReliabilityBand::Poor
    } else if icc < 0.60 {
        ReliabilityBand::Fair
    } else if icc < 0.75 {
        ReliabilityBand::Good
    } else {
        ReliabilityBand::Excellent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    /// Between-subject mean square.
    pub ms_rows: f64,
    /// Between-rater mean square.
    pub ms_cols: f64,
    pub ms_error: f64,
    pub n: usize,
    pub k: usize,
    pub band: ReliabilityBand,
}

fn icc_from_mean_squares(
    ms_rows: f64,
    ms_cols: f64,
    ms_error: f64,
    n: usize,
    k: usize,
) -> Result<IccResult, StatsError> {
    if ms_rows == 0.0 && ms_cols == 0.0 && ms_error == 0.0 {
        return Err(StatsError::DegenerateVariance("all ratings are identical"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let denom = ms_rows + (kf - 1.0) * ms_error + kf / nf * (ms_cols - ms_error);
    if denom == 0.0 || !denom.is_finite() {
        return Err(StatsError::DegenerateVariance("ICC denominator vanishes"));
    }
    let icc = (ms_rows - ms_error) / denom;
    Ok(IccResult {
        icc,
        ms_rows,
        ms_cols,
        ms_error,
        n,
        k,
        band: reliability_band(icc),
    })
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
///
/// For two raters the ANOVA sums of squares reduce to sums over pair sums
/// `s = a + b` and differences `d = a - b`:
/// `SSR = Σ(s - s̄)²/2`, `SSC = n d̄²/2`, `SSE = Σ(d - d̄)²/2`.
pub fn icc_2_1(s: &PairedSeries) -> Result<IccResult, StatsError> {
    s.require(2)?;
    let n = s.len();
    let sums: Vec<f64> = s.a.iter().zip(&s.b).map(|(x, y)| x + y).collect();
    let diffs = s.differences();
    let (ms, md) = (mean(&sums), mean(&diffs));
    let ss_rows: f64 = sums.iter().map(|v| (v - ms).powi(2)).sum::<f64>() / 2.0;
    let ss_cols = n as f64 * md * md / 2.0;
    let ss_err: f64 = diffs.iter().map(|v| (v - md).powi(2)).sum::<f64>() / 2.0;
    let df = (n - 1) as f64;
    icc_from_mean_squares(ss_rows / df, ss_cols, ss_err / df, n, 2)
}

/// ICC(2,1) for `n` subjects rated by `k ≥ 2` raters, `table[subject][rater]`.
pub fn icc_2_1_table(table: &[Vec<f64>]) -> Result<IccResult, StatsError> {
    let n = table.len();
    if n < 2 {
        return Err(StatsError::TooFew { needed: 2, got: n });
    }
    let k = table[0].len();
    if k < 2 {
        return Err(StatsError::TooFew { needed: 2, got: k });
    }
    for (row, r) in table.iter().enumerate() {
        if r.len() != k {
            return Err(StatsError::Ragged {
                row,
                expected: k,
                got: r.len(),
            });
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(row * k + j));
        }
    }
    let row_means: Vec<f64> = table.iter().map(|r| mean(r)).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| table.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let grand = mean(&col_means);
    let ss_rows = k as f64 * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = n as f64 * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_err: f64 = table
        .iter()
        .zip(&row_means)
        .flat_map(|(r, rm)| {
            r.iter()
                .zip(&col_means)
                .map(move |(x, cm)| (x - rm - cm + grand).powi(2))
        })
        .sum();
    let (nf, kf) = (n as f64, k as f64);
    icc_from_mean_squares(
        ss_rows / (nf - 1.0),
        ss_cols / (kf - 1.0),
        ss_err / ((nf - 1.0) * (kf - 1.0)),
        n,
        k,
    )
}

/// Proportional-bias regression of difference on mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionalBias {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: Option<f64>,
    /// Two-sided p-value for zero slope; absent below three pairs.
    pub slope_p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanResult {
    pub n: usize,
    pub bias: f64,
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    /// `None` when all pair means coincide and the slope is undefined.
    pub regression: Option<ProportionalBias>,
}

impl BlandAltmanResult {
    pub const LOA_Z: f64 = 1.96;

    pub fn loa_half_width(&self) -> f64 {
        Self::LOA_Z * self.sd_diff
    }
}

pub fn bland_altman(s: &PairedSeries) -> Result<BlandAltmanResult, StatsError> {
    s.require(2)?;
    let d = s.differences();
    let m = s.means();
    let bias = mean(&d);
    let sd_diff = sample_sd(&d);
    let half = BlandAltmanResult::LOA_Z * sd_diff;
    let regression = linear_fit(&m, &d).map(|f| ProportionalBias {
        slope: f.slope,
        intercept: f.intercept,
        slope_se: f.slope_se,
        slope_p: f.slope_p,
    });
    Ok(BlandAltmanResult {
        n: s.len(),
        bias,
        sd_diff,
        loa_low: bias - half,
        loa_high: bias + half,
        regression,
    })
}

/// Everything reported for one angle of one cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: usize,
    pub mae: f64,
    pub median_abs_diff: f64,
    pub icc: Option<IccResult>,
    pub bland_altman: Option<BlandAltmanResult>,
    pub notices: Vec<String>,
}

/// Runs every agreement statistic the series supports, recording why any
/// statistic was skipped instead of failing outright.
pub fn agreement_report(s: &PairedSeries) -> Result<AgreementReport, StatsError> {
    let mut notices = Vec::new();
    let icc = match icc_2_1(s) {
        Ok(r) => Some(r),
        Err(e) => {
            notices.push(format!("ICC(2,1) skipped: {e}"));
            None
        }
    };
    let bland_altman = match bland_altman(s) {
        Ok(r) => {
            if r.regression.is_none() {
                notices.push("proportional-bias regression skipped: all pair means are identical".into());
            } else if r.regression.is_some_and(|g| g.slope_p.is_none()) {
                notices.push("proportional-bias p-value skipped: needs at least 3 pairs".into());
            }
            Some(r)
        }
        Err(e) => {
            notices.push(format!("Bland-Altman skipped: {e}"));
            None
        }
    };
    Ok(AgreementReport {
        n: s.len(),
        mae: mae(s)?,
        median_abs_diff: median_abs_diff(s)?,
        icc,
        bland_altman,
        notices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(a: &[f64], b: &[f64]) -> PairedSeries {
        PairedSeries::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            PairedSeries::new(vec![1.0], vec![]),
            Err(StatsError::LengthMismatch { a: 1, b: 0 })
        );
        assert_eq!(
            PairedSeries::new(vec![1.0, f64::NAN], vec![1.0, 2.0]),
            Err(StatsError::NonFinite(1))
        );
    }

    #[test]
    fn absolute_error_summaries() {
        let same = series(&[1.0, 5.0, 9.0], &[1.0, 5.0, 9.0]);
        assert_eq!(mae(&same).unwrap(), 0.0);
        assert_eq!(median_abs_diff(&same).unwrap(), 0.0);
        assert_eq!(mae(&series(&[10.0, 20.0], &[12.0, 17.0])).unwrap(), 2.5);
        let shifted = series(&[1.0, 5.0, 9.0], &[4.5, 8.5, 12.5]);
        assert_eq!(mae(&shifted).unwrap(), 3.5);
        assert_eq!(median_abs_diff(&series(&[1.0, 2.0, 100.0], &[0.0; 3])).unwrap(), 2.0);
        assert_eq!(median_abs_diff(&series(&[1.0, 3.0], &[0.0; 2])).unwrap(), 2.0);
        assert!(mae(&series(&[], &[])).is_err());
    }

    #[test]
    fn icc_perfect_agreement() {
        let s = series(&[30.0, 52.5, 61.0, 77.0], &[30.0, 52.5, 61.0, 77.0]);
        let r = icc_2_1(&s).unwrap();
        assert_eq!(r.icc, 1.0);
        assert_eq!(r.band, ReliabilityBand::Excellent);
    }

    #[test]
    fn icc_constant_offset() {
        // ANOVA by hand: MSR = 10/3, MSC = 200, MSE = 0 -> ICC = 1/31.
        let r = icc_2_1(&series(&[1.0, 2.0, 3.0, 4.0], &[11.0, 12.0, 13.0, 14.0])).unwrap();
        assert_relative_eq!(r.ms_rows, 10.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(r.ms_cols, 200.0, epsilon = 1e-12);
        assert_eq!(r.ms_error, 0.0);
        assert_relative_eq!(r.icc, 1.0 / 31.0, epsilon = 1e-12);
    }

    #[test]
    fn icc_reversed_is_negative() {
        let r = icc_2_1(&series(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0])).unwrap();
        assert!(r.icc < 0.0);
        assert_relative_eq!(r.icc, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn icc_degenerate() {
        assert!(matches!(
            icc_2_1(&series(&[3.0, 3.0], &[3.0, 3.0])),
            Err(StatsError::DegenerateVariance(_))
        ));
        assert!(matches!(
            icc_2_1(&series(&[3.0], &[3.0])),
            Err(StatsError::TooFew { .. })
        ));
        assert!(matches!(
            icc_2_1(&series(&[1.0, 2.0], &[2.0, 1.0])),
            Err(StatsError::DegenerateVariance(_))
        ));
    }

    #[test]
    fn table_form_matches_pair_form() {
        let a = [12.0, 40.5, 33.0, 71.0, 55.5];
        let b = [15.0, 38.0, 36.5, 64.0, 58.0];
        let table: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| vec![*x, *y]).collect();
        let fast = icc_2_1(&series(&a, &b)).unwrap();
        let slow = icc_2_1_table(&table).unwrap();
        assert_relative_eq!(fast.icc, slow.icc, epsilon = 1e-12);
        assert!(matches!(
            icc_2_1_table(&[vec![1.0, 2.0], vec![1.0]]),
            Err(StatsError::Ragged { row: 1, .. })
        ));
    }

    #[test]
    fn three_rater_table() {
        // first three judges of the Shrout & Fleiss example
        let t = vec![
            vec![9.0, 2.0, 5.0],
            vec![6.0, 1.0, 3.0],
            vec![8.0, 4.0, 6.0],
            vec![7.0, 1.0, 2.0],
            vec![10.0, 5.0, 6.0],
            vec![6.0, 2.0, 4.0],
        ];
        let r = icc_2_1_table(&t).unwrap();
        // SSR = 34.5, SSC = 82.3333, SSE = 5.6667 (from SST - SSR - SSC)
        assert_relative_eq!(r.ms_rows, 34.5 / 5.0, epsilon = 1e-9);
        assert_relative_eq!(r.ms_cols, 247.0 / 6.0, epsilon = 1e-9);
        assert_relative_eq!(r.ms_error, 17.0 / 30.0, epsilon = 1e-9);
        assert_relative_eq!(r.icc, 0.223_529_411_764_705_87, epsilon = 1e-9);
    }

    #[test]
    fn bands() {
        assert_eq!(reliability_band(0.82), ReliabilityBand::Excellent);
        assert_eq!(reliability_band(0.75), ReliabilityBand::Excellent);
        assert_eq!(reliability_band(0.73), ReliabilityBand::Good);
        assert_eq!(reliability_band(0.52), ReliabilityBand::Fair);
        assert_eq!(reliability_band(0.41), ReliabilityBand::Fair);
        assert_eq!(reliability_band(0.40), ReliabilityBand::Fair);
        assert_eq!(reliability_band(0.399), ReliabilityBand::Poor);
    }

    #[test]
    fn bland_altman_constant_offset() {
        let b: Vec<f64> = (0..12).map(|i| 40.0 + 3.0 * f64::from(i)).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 2.0).collect();
        let r = bland_altman(&series(&a, &b)).unwrap();
        assert_eq!(r.bias, 2.0);
        assert_eq!(r.sd_diff, 0.0);
        assert_eq!((r.loa_low, r.loa_high), (2.0, 2.0));
        let reg = r.regression.unwrap();
        assert_eq!(reg.slope, 0.0);
        assert_eq!(reg.slope_p, Some(1.0));
    }

    #[test]
    fn bland_altman_difference_equals_mean() {
        // a - b = (a + b) / 2  <=>  a = 3b
        let b: Vec<f64> = (1..=12).map(|i| 1.5 * f64::from(i)).collect();
        let a: Vec<f64> = b.iter().map(|v| 3.0 * v).collect();
        let r = bland_altman(&series(&a, &b)).unwrap();
        let reg = r.regression.unwrap();
        assert_relative_eq!(reg.slope, 1.0, epsilon = 1e-12);
        assert!(reg.slope_p.unwrap() < 1e-6);
    }

    #[test]
    fn bland_altman_degenerate_regression() {
        // every pair has mean 10
        let r = bland_altman(&series(&[9.0, 11.0, 10.0], &[11.0, 9.0, 10.0])).unwrap();
        assert!(r.regression.is_none());
        assert_eq!(r.bias, 0.0);
        let rep = agreement_report(&series(&[9.0, 11.0, 10.0], &[11.0, 9.0, 10.0])).unwrap();
        assert!(rep.notices.iter().any(|n| n.contains("proportional-bias")));
    }

    #[test]
    fn clinical_scale_loa() {
        let r = BlandAltmanResult {
            n: 40,
            bias: 0.87,
            sd_diff: 5.36,
            loa_low: 0.0,
            loa_high: 0.0,
            regression: None,
        };
        assert!((r.loa_half_width() - 10.5).abs() < 0.01);
    }

    #[test]
    fn report_for_single_pair() {
        let rep = agreement_report(&series(&[50.0], &[52.0])).unwrap();
        assert_eq!(rep.mae, 2.0);
        assert!(rep.icc.is_none() && rep.bland_altman.is_none());
        assert_eq!(rep.notices.len(), 2);
    }
}
