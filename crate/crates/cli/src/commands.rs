use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hipmetrics::evaluate::{evaluate as evaluate_records, EvaluationReport};
use hipmetrics::heatmap::{
    encode as encode_heatmap, sample_tta_views, tta_aggregate, warp_heatmap, AugmentRanges, Heatmap, HeatmapStack,
};
use hipmetrics::io::{
    read_annotations, read_heatmaps, read_report, summarize_runs, write_annotations, write_bland_altman_csv,
    write_heatmaps, write_json, write_manifest, FormatError, ManifestRow, ReadMode,
};
use hipmetrics::model::{Frame, LandmarkSet, SubjectRecord, NETWORK_SIZE};
use hipmetrics::split::{balanced_split, PatientAlphas, SplitError};
use rayon::prelude::*;

use crate::{CliError, Config};

const EXT: &str = "hmf";

/// Heatmap files of one image with their view index, if any.
type ViewFiles = Vec<(Option<u64>, PathBuf)>;

fn load(path: &Path, mode: ReadMode) -> Result<Vec<SubjectRecord>, CliError> {
    let ann = read_annotations(path, mode)?;
    for w in &ann.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(ann.records)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| FormatError::Io {
        path: dir.to_owned(),
        source: e,
    })?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    let f = File::create(path).map_err(|e| FormatError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(BufWriter::new(f))
}

fn check_key(key: &str) -> Result<(), CliError> {
    if key.is_empty() || key == "." || key == ".." || key.contains(['/', '\\']) {
        return Err(CliError::Input(format!(
            "{key:?}: image key cannot be used as a file name"
        )));
    }
    Ok(())
}

fn single_file(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.{EXT}"))
}

fn view_file(dir: &Path, key: &str, view: usize) -> PathBuf {
    dir.join(format!("{key}.view{view}.{EXT}"))
}

fn ground_truth_heatmaps(record: &SubjectRecord, cfg: &Config) -> Result<Vec<Heatmap>, CliError> {
    let side = NETWORK_SIZE as usize;
    let gt = record
        .ground_truth
        .to_frame(Frame::Network512, &record.geometry)
        .map_err(|(id, e)| CliError::Input(format!("{}: {id}: {e}", record.key())))?;
    gt.iter()
        .map(|(id, p)| {
            encode_heatmap(p, side, side, cfg.gaussian())
                .map_err(|e| CliError::Input(format!("{}: {id}: {e}", record.key())))
        })
        .collect()
}

pub fn encode(cfg: &Config, mode: ReadMode, annotations: &Path, out_dir: &Path, views: bool) -> Result<(), CliError> {
    let records = load(annotations, mode)?;
    for r in &records {
        check_key(r.key())?;
    }
    ensure_dir(out_dir)?;
    let side = NETWORK_SIZE as usize;
    let transforms = if views {
        sample_tta_views(cfg.seed, cfg.tta_views, &AugmentRanges::default(), side, side)
    } else {
        Vec::new()
    };
    records.par_iter().try_for_each(|r| -> Result<(), CliError> {
        let heatmaps = ground_truth_heatmaps(r, cfg)?;
        if transforms.is_empty() {
            let stack = HeatmapStack::identity(heatmaps).map_err(|e| CliError::Input(e.to_string()))?;
            write_heatmaps(single_file(out_dir, r.key()), &stack)?;
            return Ok(());
        }
        for (i, (_, t)) in transforms.iter().enumerate() {
            let warped = heatmaps
                .iter()
                .map(|h| warp_heatmap(h, t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Degenerate(format!("{}: view {i}: {e}", r.key())))?;
            let stack = HeatmapStack::new(warped, *t).map_err(|e| CliError::Degenerate(e.to_string()))?;
            write_heatmaps(view_file(out_dir, r.key(), i), &stack)?;
        }
        Ok(())
    })?;
    log::info!("wrote heatmaps for {} images to {}", records.len(), out_dir.display());
    Ok(())
}

/// Heatmap files in `dir` grouped by image key: `<key>.hmf` alone or
/// `<key>.view<N>.hmf` views, the latter ordered by `N`.
fn index_heatmaps(dir: &Path) -> Result<BTreeMap<String, ViewFiles>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| FormatError::Io {
        path: dir.to_owned(),
        source: e,
    })?;
    let mut found: BTreeMap<String, ViewFiles> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| FormatError::Io {
            path: dir.to_owned(),
            source: e,
        })?;
        let name = entry.file_name();
        let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".hmf")) else {
            continue;
        };
        let (key, view) = match stem.rsplit_once(".view") {
            Some((k, n)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => (k, n.parse().ok()),
            _ => (stem, None),
        };
        found.entry(key.to_owned()).or_default().push((view, entry.path()));
    }
    for files in found.values_mut() {
        files.sort();
    }
    Ok(found)
}

fn decode_one(key: &str, files: &ViewFiles) -> Result<LandmarkSet, CliError> {
    let side = NETWORK_SIZE as usize;
    let stacks = files
        .iter()
        .map(|(_, path)| {
            let stack = read_heatmaps(path, Some(4))?;
            if stack.shape() != (4, side, side) {
                let (k, h, w) = stack.shape();
                return Err(CliError::Input(format!(
                    "{}: heatmaps are {k}x{h}x{w}, expected 4x{side}x{side}",
                    path.display()
                )));
            }
            Ok(stack)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let merged;
    let stack = if stacks.len() == 1 && stacks[0].view_transform.is_identity() {
        &stacks[0]
    } else {
        merged = tta_aggregate(&stacks).map_err(|e| CliError::Input(format!("{key}: {e}")))?;
        &merged
    };
    stack
        .decode_landmarks()
        .map_err(|e| CliError::Input(format!("{key}: {e}")))
}

pub fn decode(mode: ReadMode, heatmaps: &Path, annotations: &Path, out: &Path) -> Result<(), CliError> {
    let mut records = load(annotations, mode)?;
    let index = index_heatmaps(heatmaps)?;
    if let Some(r) = records.iter().find(|r| !index.contains_key(r.key())) {
        return Err(CliError::Input(format!(
            "{}: no heatmap file in {}",
            r.key(),
            heatmaps.display()
        )));
    }
    let decoded = records
        .par_iter()
        .map(|r| decode_one(r.key(), &index[r.key()]))
        .collect::<Result<Vec<_>, _>>()?;
    for (r, p) in records.iter_mut().zip(decoded) {
        r.predicted = Some(p);
    }
    write_annotations(out, &records)?;
    log::info!("decoded {} images", records.len());
    Ok(())
}

fn write_ba_files(report: &EvaluationReport, dir: &Path) -> Result<usize, CliError> {
    ensure_dir(dir)?;
    let mut written = 0;
    for (modality, cohort) in &report.cohorts {
        for (angle, section) in [("alpha", &cohort.alpha), ("lce", &cohort.lce)] {
            let Some(points) = report.bland_altman_points(*modality, angle) else {
                continue;
            };
            let Some(result) = section.bland_altman.as_ref().and_then(|b| b.result) else {
                continue;
            };
            let path = dir.join(format!("{modality}_{angle}_bland_altman.csv"));
            let mut w = create(&path)?;
            write_bland_altman_csv(&mut w, &points, &result)?;
            w.flush().map_err(|e| FormatError::Io { path, source: e })?;
            written += 1;
        }
    }
    Ok(written)
}

fn run_evaluation(cfg: &Config, mode: ReadMode, annotations: &Path) -> Result<EvaluationReport, CliError> {
    let records = load(annotations, mode)?;
    let report = evaluate_records(&records, &cfg.eval_settings())?;
    for (modality, cohort) in &report.cohorts {
        for n in &cohort.notices {
            log::warn!("{modality}: {n}");
        }
    }
    Ok(report)
}

pub fn evaluate(
    cfg: &Config,
    mode: ReadMode,
    annotations: &Path,
    out: &Path,
    bland_altman_dir: Option<&Path>,
) -> Result<(), CliError> {
    let report = run_evaluation(cfg, mode, annotations)?;
    write_json(out, &report)?;
    if let Some(dir) = bland_altman_dir {
        write_ba_files(&report, dir)?;
    }
    Ok(())
}

pub fn bland_altman(cfg: &Config, mode: ReadMode, annotations: &Path, out_dir: &Path) -> Result<(), CliError> {
    let report = run_evaluation(cfg, mode, annotations)?;
    if write_ba_files(&report, out_dir)? == 0 {
        return Err(CliError::Degenerate(
            "no cohort has enough subjects for Bland–Altman analysis".into(),
        ));
    }
    Ok(())
}

pub fn split(
    cfg: &Config,
    mode: ReadMode,
    annotations: &Path,
    out: &Path,
    summary: Option<&Path>,
) -> Result<(), CliError> {
    let records = load(annotations, mode)?;
    let thresholds = cfg.thresholds();
    let mut patients: Vec<PatientAlphas> = Vec::new();
    let mut slot: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &records {
        let alpha = match r.clinician_angles {
            Some((a, _)) => a,
            None => {
                hipmetrics::anatomical_angles(&r.ground_truth, &r.geometry, thresholds)
                    .map_err(|e| CliError::Input(format!("{}: ground-truth {e}", r.key())))?
                    .alpha_deg
            }
        };
        let i = *slot.entry(r.subject_id.as_str()).or_insert_with(|| {
            patients.push(PatientAlphas {
                id: r.subject_id.clone(),
                alphas: Vec::new(),
            });
            patients.len() - 1
        });
        patients[i].alphas.push(alpha);
    }
    let assignment = balanced_split(&patients, cfg.split_ratios, cfg.seed, cfg.restarts).map_err(|e| match e {
        SplitError::BadRatios(_) => CliError::Config(e.to_string()),
        other => CliError::Input(other.to_string()),
    })?;
    let rows: Vec<ManifestRow> = records
        .iter()
        .map(|r| ManifestRow {
            subject_id: r.subject_id.clone(),
            image: r.key().to_owned(),
            partition: assignment.partition_of(&r.subject_id).expect("every patient assigned"),
        })
        .collect();
    let mut w = create(out)?;
    write_manifest(&mut w, &rows)?;
    w.flush().map_err(|e| FormatError::Io {
        path: out.to_owned(),
        source: e,
    })?;
    log::info!(
        "split {:?} patients, max pairwise KS {:.4} (restart {})",
        assignment.patient_counts,
        assignment.ks.max(),
        assignment.restart
    );
    if let Some(path) = summary {
        write_json(path, &assignment)?;
    }
    Ok(())
}

pub fn summarize(reports: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let values = reports.iter().map(read_report).collect::<Result<Vec<_>, _>>()?;
    let summary = summarize_runs(&values);
    match out {
        Some(path) => write_json(path, &summary)?,
        None => {
            let text = serde_json::to_string_pretty(&summary).map_err(FormatError::from)?;
            println!("{text}");
        }
    }
    Ok(())
}
