//! Screening performance of a binary threshold classifier.

use serde::{Deserialize, Serialize};

use crate::localisation::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub const fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self {
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fn_,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    /// Condition-positive count (tp + fn).
    pub fn positives(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    pub fn negatives(&self) -> u64 {
        self.true_neg + self.false_pos
    }

    /// Counts obtained by calling the negative class positive.
    pub fn swapped(&self) -> Self {
        Self::new(self.true_neg, self.false_neg, self.true_pos, self.false_pos)
    }
}

pub fn confusion(pred: &[bool], gt: &[bool]) -> Result<ConfusionCounts, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

/// Rates in percent. A rate whose denominator is zero is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub counts: ConfusionCounts,
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn rates(c: ConfusionCounts) -> ScreeningReport {
    ScreeningReport {
        accuracy: percent(c.true_pos + c.true_neg, c.total()),
        sensitivity: percent(c.true_pos, c.true_pos + c.false_neg),
        specificity: percent(c.true_neg, c.true_neg + c.false_pos),
        ppv: percent(c.true_pos, c.true_pos + c.false_pos),
        npv: percent(c.true_neg, c.true_neg + c.false_neg),
        counts: c,
    }
}

/// Two-decimal display with halves rounded up, e.g. `54.545 -> "54.55"`.
///
/// Values within 1e-9 of a half-cent are treated as exact halves so binary
/// representation error cannot round them down.
pub fn display_2dp(v: f64) -> String {
    let scaled = v * 100.0;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let cents = if frac >= 0.5 - 1e-9 { floor + 1.0 } else { floor };
    let out = cents / 100.0;
    // avoid "-0.00"
    format!("{:.2}", if out == 0.0 { 0.0 } else { out })
}
