//! Dataset pairing, batch evaluation and CSV/JSON reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{load_mask, load_scoremap};
use crate::metrics::{evaluate, MeticulosityParams, MetricReport};
use crate::scalar::Scalar;

pub const CSV_HEADER: [&str; 6] = ["stem", "mae", "sm", "iou", "mba", "mq"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairedFile {
    pub stem: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetPairing {
    /// Sorted by stem.
    pub pairs: Vec<PairedFile>,
    pub warnings: Vec<String>,
}

fn stems(dir: &Path) -> Result<(BTreeMap<String, PathBuf>, Vec<String>)> {
    let mut by_stem: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.starts_with('.') {
            continue;
        }
        by_stem.entry(stem.to_string()).or_default().push(path);
    }
    let mut unique = BTreeMap::new();
    let mut warnings = Vec::new();
    for (stem, mut paths) in by_stem {
        if paths.len() == 1 {
            unique.insert(stem, paths.pop().expect("one path"));
        } else {
            paths.sort();
            let list: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
            warnings.push(format!(
                "ambiguous stem {stem:?} in {}: {}",
                dir.display(),
                list.join(", ")
            ));
        }
    }
    Ok((unique, warnings))
}

/// Matches files by case-sensitive stem, ignoring extensions.
pub fn pair_dataset(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>) -> Result<DatasetPairing> {
    let (preds, mut warnings) = stems(pred_dir.as_ref())?;
    let (mut gts, gt_warnings) = stems(gt_dir.as_ref())?;
    warnings.extend(gt_warnings);
    let mut pairs = Vec::new();
    for (stem, pred) in preds {
        match gts.remove(&stem) {
            Some(gt) => pairs.push(PairedFile { stem, pred, gt }),
            None => warnings.push(format!("prediction {stem:?} has no ground truth")),
        }
    }
    for stem in gts.keys() {
        warnings.push(format!("ground truth {stem:?} has no prediction"));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyPairing);
    }
    Ok(DatasetPairing { pairs, warnings })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub stem: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport<T = f64> {
    pub images: BTreeMap<String, MetricReport<T>>,
    /// Unweighted mean over `images`; absent when nothing was evaluated.
    pub aggregate: Option<MetricReport<T>>,
    pub skipped: Vec<SkippedImage>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl<T: Scalar> Default for BatchReport<T> {
    fn default() -> Self {
        Self {
            images: BTreeMap::new(),
            aggregate: None,
            skipped: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Evaluates every pair. Unreadable files and degenerate ground truths are
/// skipped with their reason rather than failing the batch.
pub fn evaluate_batch<T: Scalar>(pairing: &DatasetPairing, params: MeticulosityParams) -> BatchReport<T> {
    let results: Vec<Result<MetricReport<T>>> = pairing
        .pairs
        .par_iter()
        .map(|p| {
            let pred = load_scoremap::<T>(&p.pred)?;
            let gt = load_mask(&p.gt)?;
            evaluate(&pred, &gt, params)
        })
        .collect();
    let mut report = BatchReport {
        warnings: pairing.warnings.clone(),
        ..Default::default()
    };
    for (p, r) in pairing.pairs.iter().zip(results) {
        match r {
            Ok(m) => {
                report.images.insert(p.stem.clone(), m);
            }
            Err(e) => report.skipped.push(SkippedImage {
                stem: p.stem.clone(),
                reason: e.to_string(),
            }),
        }
    }
    report.skipped.sort_by(|a, b| a.stem.cmp(&b.stem));
    report.aggregate = MetricReport::mean(report.images.values());
    report
}

pub fn to_csv<T: Scalar>(r: &BatchReport<T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for (stem, m) in &r.images {
        let mut row = vec![stem.clone()];
        row.extend(m.as_array().iter().map(|v| format!("{:.6}", v.to_f64_lossy())));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json<T: Scalar>(r: &BatchReport<T>) -> Result<String> {
    Ok(serde_json::to_string_pretty(r)? + "\n")
}

pub fn write_report<T: Scalar>(
    r: &BatchReport<T>,
    csv_path: impl AsRef<Path>,
    json_path: impl AsRef<Path>,
) -> Result<()> {
    let (c, j) = (csv_path.as_ref(), json_path.as_ref());
    fs::write(c, to_csv(r)?).map_err(|e| Error::io(c, e))?;
    fs::write(j, to_json(r)?).map_err(|e| Error::io(j, e))
}
