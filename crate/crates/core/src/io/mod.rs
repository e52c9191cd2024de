//! Portable file formats exchanged with the imaging side and with reviewers.

mod annotations;
mod heatmap_file;
mod report;
mod tables;

pub use annotations::{
    parse_annotations, read_annotations, to_json_string, write_annotations, Annotations, ReadMode, ANNOTATION_FORMAT,
    ANNOTATION_VERSION,
};
pub use heatmap_file::{
    decode_heatmap_file, encode_heatmap_file, read_heatmaps, write_heatmaps, HEATMAP_MAGIC, HEATMAP_VERSION,
};
pub use report::{read_report, summarize_runs, write_json, Cell, RunSummary, SummaryCell};
pub use tables::{read_manifest, write_bland_altman_csv, write_manifest, BlandAltmanPoint, ManifestRow};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: {field}: {reason}", subject.as_deref().unwrap_or("document"))]
    Validation {
        subject: Option<String>,
        field: String,
        reason: String,
    },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("unsupported {what} version {found}")]
    UnsupportedVersion { what: &'static str, found: u64 },
    #[error("bad magic bytes {0:02x?}, expected \"HMF1\"")]
    BadMagic(Vec<u8>),
    #[error("file truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid transform flag {0:#04x}")]
    BadFlag(u8),
    #[error("expected {expected} landmark heatmaps, file has {got}")]
    LandmarkCount { expected: u32, got: u32 },
    #[error("heatmap payload invalid: {0}")]
    Payload(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl FormatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(subject: Option<&str>, field: impl Into<String>, reason: impl Into<String>) -> Self {
        FormatError::Validation {
            subject: subject.map(str::to_owned),
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that mean the input is malformed (as opposed to I/O).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, FormatError::Io { .. })
    }
}
