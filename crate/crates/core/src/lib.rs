//! Landmark heatmaps, hip angles and clinical agreement statistics for
//! femoroacetabular impingement assessment.
//!
//! Coordinates are `(x, y)` pixels with `x` the column and `y` the row,
//! `y` growing downwards.

pub mod agreement;
pub mod diagnostic;
pub mod evaluate;
pub mod geometry;
pub mod heatmap;
pub mod io;
pub mod localisation;
pub mod model;
pub mod split;
pub mod stats;

pub use agreement::{agreement_report, bland_altman, icc_2_1, PairedSeries, StatsError};
pub use diagnostic::{confusion, rates, ConfusionCounts, ScreeningReport};
pub use evaluate::{evaluate, EvalSettings, EvaluateError, EvaluationReport};
pub use geometry::{alpha_angle, anatomical_angles, lce_angle};
pub use heatmap::{decode_argmax, encode, GaussianSpec, Heatmap, HeatmapStack};
pub use model::{
    AnglePair, Frame, ImageGeometry, LandmarkId, LandmarkSet, Modality, Point2, SubjectRecord, Thresholds,
};
pub use split::{balanced_split, ks_statistic, Partition, SplitAssignment};
