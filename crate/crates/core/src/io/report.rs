//! Evaluation report cells and across-run summaries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::FormatError;
use crate::diagnostic::display_2dp;
use crate::stats::{mean, sample_sd};

/// A reported number: full precision plus its two-decimal display form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub display: String,
}

impl Cell {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            display: display_2dp(value),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::new(v)
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), FormatError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Value, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Mean ± sample standard deviation of one report cell over several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub runs: usize,
    pub mean: f64,
    /// `None` for a single run.
    pub std: Option<f64>,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    /// Keyed by the `/`-separated path of the cell inside the report.
    pub cells: BTreeMap<String, SummaryCell>,
}

fn collect_cells(v: &Value, path: &mut Vec<String>, out: &mut BTreeMap<String, Vec<f64>>) {
    match v {
        Value::Object(map) => {
            if let (Some(Value::Number(n)), Some(Value::String(_))) = (map.get("value"), map.get("display")) {
                if let Some(x) = n.as_f64() {
                    out.entry(path.join("/")).or_default().push(x);
                }
                return;
            }
            for (k, child) in map {
                path.push(k.clone());
                collect_cells(child, path, out);
                path.pop();
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                path.push(i.to_string());
                collect_cells(child, path, out);
                path.pop();
            }
        }
        _ => {}
    }
}

/// Aggregates every numeric cell present in the given reports. Cells missing
/// from some runs are summarised over the runs that have them.
pub fn summarize_runs(reports: &[Value]) -> RunSummary {
    let mut values = BTreeMap::new();
    for r in reports {
        collect_cells(r, &mut Vec::new(), &mut values);
    }
    let cells = values
        .into_iter()
        .map(|(path, xs)| {
            let m = mean(&xs);
            let std = (xs.len() > 1).then(|| sample_sd(&xs));
            let display = match std {
                Some(s) => format!("{}±{}", display_2dp(m), display_2dp(s)),
                None => display_2dp(m),
            };
            (
                path,
                SummaryCell {
                    runs: xs.len(),
                    mean: m,
                    std,
                    display,
                },
            )
        })
        .collect();
    RunSummary {
        runs: reports.len(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn cell_display() {
        assert_eq!(Cell::new(54.545454).display, "54.55");
        assert_eq!(
            serde_json::to_value(Cell::new(2.0)).unwrap(),
            json!({"value": 2.0, "display": "2.00"})
        );
    }

    #[test]
    fn summary_over_runs() {
        let run = |v: f64| {
            json!({
                "cohorts": {"mri": {"overall": {"value": v, "display": "x"}, "sdr": [{"value": 50.0, "display": "50.00"}]}},
                "note": "ignored"
            })
        };
        let s = summarize_runs(&[run(2.8), run(3.0), run(3.2)]);
        assert_eq!(s.runs, 3);
        let c = &s.cells["cohorts/mri/overall"];
        assert!((c.mean - 3.0).abs() < 1e-12);
        assert!((c.std.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(c.display, "3.00±0.20");
        assert_eq!(s.cells["cohorts/mri/sdr/0"].display, "50.00±0.00");
        let single = summarize_runs(&[run(1.0)]);
        assert_eq!(single.cells["cohorts/mri/overall"].std, None);
    }
}
