//! Patient-level train/validation/test splitting balanced on the α-angle
//! distribution.
//!
//! Candidate partitions are drawn by random restarts; the one whose three
//! α samples have the smallest maximum pairwise two-sample KS statistic wins.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::StatsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("need at least 3 patients, got {0}")]
    TooFewPatients(usize),
    #[error("ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("ratios {ratios:?} leave the {partition} partition empty with {patients} patients")]
    EmptyPartition {
        ratios: [f64; 3],
        patients: usize,
        partition: Partition,
    },
    #[error("patient `{0}` has no α values")]
    NoImages(String),
    #[error("patient `{0}` is listed twice")]
    DuplicatePatient(String),
    #[error("restarts must be at least 1")]
    NoRestarts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Partition::Train),
            "val" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            other => Err(format!("unknown partition `{other}`")),
        }
    }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(ks_sorted(&a, &b))
}

fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One patient and the α-angles of all their images.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientAlphas {
    pub id: String,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseKs {
    pub train_val: f64,
    pub train_test: f64,
    pub val_test: f64,
}

impl PairwiseKs {
    pub fn max(&self) -> f64 {
        self.train_val.max(self.train_test).max(self.val_test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<String, Partition>,
    pub patient_counts: [usize; 3],
    pub image_counts: [usize; 3],
    /// Achieved share of images per partition.
    pub ratios: [f64; 3],
    pub ks: PairwiseKs,
    /// Restart that produced this assignment.
    pub restart: usize,
}

impl SplitAssignment {
    pub fn partition_of(&self, patient: &str) -> Option<Partition> {
        self.assignment.get(patient).copied()
    }
}

/// Patients per partition: train and validation are floored, test takes
/// the remainder (89 patients at 65:10:25 gives 57:8:24).
pub fn partition_sizes(patients: usize, ratios: [f64; 3]) -> Result<[usize; 3], SplitError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadRatios(ratios));
    }
    let n = patients as f64;
    // guard against 0.65 * 100 = 64.999...
    let floor = |r: f64| (r * n + 1e-9).floor() as usize;
    let train = floor(ratios[0]).min(patients);
    let val = floor(ratios[1]).min(patients - train);
    let sizes = [train, val, patients - train - val];
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(SplitError::EmptyPartition {
            ratios,
            patients,
            partition: Partition::ALL[i],
        });
    }
    Ok(sizes)
}

/// Max pairwise KS of the α samples of a patient ordering cut at `sizes`.
fn evaluate(order: &[usize], sizes: [usize; 3], patients: &[PatientAlphas]) -> (PairwiseKs, [usize; 3]) {
    let mut samples: [Vec<f64>; 3] = Default::default();
    let bounds = [sizes[0], sizes[0] + sizes[1]];
    for (pos, &p) in order.iter().enumerate() {
        let part = if pos < bounds[0] {
            0
        } else if pos < bounds[1] {
            1
        } else {
            2
        };
        samples[part].extend_from_slice(&patients[p].alphas);
    }
    for s in &mut samples {
        s.sort_by(f64::total_cmp);
    }
    let ks = PairwiseKs {
        train_val: ks_sorted(&samples[0], &samples[1]),
        train_test: ks_sorted(&samples[0], &samples[2]),
        val_test: ks_sorted(&samples[1], &samples[2]),
    };
    (ks, [samples[0].len(), samples[1].len(), samples[2].len()])
}

fn restart_order(n: usize, seed: u64, restart: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Searches `restarts` random patient partitions and keeps the best balanced
/// one. Ties resolve to the lowest restart index, so the result is a pure
/// function of `(patients, ratios, seed, restarts)`.
pub fn balanced_split(
    patients: &[PatientAlphas],
    ratios: [f64; 3],
    seed: u64,
    restarts: usize,
) -> Result<SplitAssignment, SplitError> {
    if patients.len() < 3 {
        return Err(SplitError::TooFewPatients(patients.len()));
    }
    if restarts == 0 {
        return Err(SplitError::NoRestarts);
    }
    let mut seen = HashSet::new();
    for p in patients {
        if p.alphas.is_empty() {
            return Err(SplitError::NoImages(p.id.clone()));
        }
        if !seen.insert(p.id.as_str()) {
            return Err(SplitError::DuplicatePatient(p.id.clone()));
        }
    }
    let sizes = partition_sizes(patients.len(), ratios)?;
    let (restart, ks, images) = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let order = restart_order(patients.len(), seed, r);
            let (ks, images) = evaluate(&order, sizes, patients);
            (r, ks, images)
        })
        .min_by(|x, y| x.1.max().total_cmp(&y.1.max()).then(x.0.cmp(&y.0)))
        .expect("at least one restart");
    Ok(build(patients, sizes, seed, restart, ks, images))
}

/// A single unbalanced random split, as drawn by restart `restart`.
pub fn random_split(
    patients: &[PatientAlphas],
    ratios: [f64; 3],
    seed: u64,
    restart: usize,
) -> Result<SplitAssignment, SplitError> {
    let sizes = partition_sizes(patients.len(), ratios)?;
    let order = restart_order(patients.len(), seed, restart);
    let (ks, images) = evaluate(&order, sizes, patients);
    Ok(build(patients, sizes, seed, restart, ks, images))
}

fn build(
    patients: &[PatientAlphas],
    sizes: [usize; 3],
    seed: u64,
    restart: usize,
    ks: PairwiseKs,
    image_counts: [usize; 3],
) -> SplitAssignment {
    let order = restart_order(patients.len(), seed, restart);
    let mut assignment = BTreeMap::new();
    for (pos, &p) in order.iter().enumerate() {
        let part = if pos < sizes[0] {
            Partition::Train
        } else if pos < sizes[0] + sizes[1] {
            Partition::Val
        } else {
            Partition::Test
        };
        assignment.insert(patients[p].id.clone(), part);
    }
    let total: usize = image_counts.iter().sum();
    SplitAssignment {
        assignment,
        patient_counts: sizes,
        image_counts,
        ratios: image_counts.map(|c| c as f64 / total as f64),
        ks,
        restart,
    }
}
