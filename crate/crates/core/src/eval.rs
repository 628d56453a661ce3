//! OSCC accuracy, PNR absolute temporal error, and per-position breakdowns.
//!
//! Every annotated clip must have a prediction; gaps are reported as a
//! coverage error instead of being skipped. Predictions for clips that exist
//! in the dataset but lack the task's annotation are ignored. Predictions for
//! clips absent from the dataset are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::localization::PnrPrediction;
use crate::model::position_bin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Oscc,
    Pnr,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Oscc => f.write_str("oscc"),
            Task::Pnr => f.write_str("pnr"),
        }
    }
}

/// Error statistics for ground-truth positions falling in `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinError {
    pub lo: f64,
    pub hi: f64,
    pub mean_error: Option<f64>,
    pub count: usize,
}

impl BinError {
    pub fn center(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub n_clips: usize,
    /// Accuracy for OSCC, mean absolute error in seconds for PNR.
    pub headline: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_bin: Option<Vec<BinError>>,
}

impl MetricsReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let metric = match self.task {
            Task::Oscc => "accuracy",
            Task::Pnr => "mae_sec",
        };
        let _ = writeln!(out, "task      {}", self.task);
        let _ = writeln!(out, "clips     {}", self.n_clips);
        let _ = writeln!(out, "{metric:<9} {:.6}", self.headline);
        if let Some(rows) = &self.per_bin {
            let _ = writeln!(out, "\n{:<14} {:>10} {:>7}", "fraction", "mae_sec", "count");
            for row in rows {
                let mean = row
                    .mean_error
                    .map_or_else(|| "-".to_string(), |m| format!("{m:.6}"));
                let _ = writeln!(
                    out,
                    "[{:.2}, {:.2}){:>4} {:>10} {:>7}",
                    row.lo, row.hi, "", mean, row.count
                );
            }
        }
        out
    }

    /// Plot-ready columns for the per-bin breakdown: bin center, mean error, count.
    pub fn write_plot_data(&self, mut writer: impl Write) -> std::io::Result<()> {
        writeln!(writer, "bin_center\tmean_error\tcount")?;
        for row in self.per_bin.iter().flatten() {
            match row.mean_error {
                Some(m) => writeln!(writer, "{:.6}\t{m:.6}\t{}", row.center(), row.count)?,
                None => writeln!(writer, "{:.6}\tnan\t{}", row.center(), row.count)?,
            }
        }
        Ok(())
    }
}

fn check_coverage<'a, T>(
    preds: &BTreeMap<String, T>,
    ds: &Dataset,
    annotated: impl Iterator<Item = &'a str>,
) -> Result<()> {
    if let Some(id) = preds.keys().find(|id| ds.clip(id).is_none()) {
        return Err(Error::UnknownClip {
            clip_id: id.clone(),
        });
    }
    let missing: Vec<String> = annotated
        .filter(|id| !preds.contains_key(*id))
        .map(str::to_string)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Coverage { missing })
    }
}

pub fn oscc_accuracy(preds: &BTreeMap<String, bool>, ds: &Dataset) -> Result<MetricsReport> {
    if ds.oscc_len() == 0 {
        return Err(Error::EmptyInput("no OSCC annotations"));
    }
    check_coverage(preds, ds, ds.oscc_annotations().map(|a| a.clip_id.as_str()))?;
    let correct = ds
        .oscc_annotations()
        .filter(|a| preds[&a.clip_id] == a.state_change)
        .count();
    Ok(MetricsReport {
        task: Task::Oscc,
        n_clips: ds.oscc_len(),
        headline: correct as f64 / ds.oscc_len() as f64,
        per_bin: None,
    })
}

/// Absolute error of every PNR-annotated clip, with its ground-truth position bin.
fn pnr_errors(
    preds: &BTreeMap<String, PnrPrediction>,
    ds: &Dataset,
    bins: usize,
) -> Result<Vec<(usize, f64)>> {
    if ds.pnr_len() == 0 {
        return Err(Error::EmptyInput("no PNR annotations"));
    }
    check_coverage(preds, ds, ds.pnr_clips().map(|(c, _)| c.clip_id.as_str()))?;
    Ok(ds
        .pnr_clips()
        .map(|(clip, ann)| {
            let bin = position_bin(ann.positive_frame, clip.num_frames, bins);
            (bin, preds[&clip.clip_id].abs_error(clip, ann))
        })
        .collect())
}

pub fn pnr_mae(preds: &BTreeMap<String, PnrPrediction>, ds: &Dataset) -> Result<MetricsReport> {
    let errors = pnr_errors(preds, ds, 1)?;
    let sum: f64 = errors.iter().map(|(_, e)| e).sum();
    Ok(MetricsReport {
        task: Task::Pnr,
        n_clips: errors.len(),
        headline: sum / errors.len() as f64,
        per_bin: None,
    })
}

/// Mean absolute error grouped by the ground-truth PNR fraction.
pub fn per_position_error(
    preds: &BTreeMap<String, PnrPrediction>,
    ds: &Dataset,
    bins: usize,
) -> Result<Vec<BinError>> {
    if bins == 0 {
        return Err(Error::Domain {
            what: "bin count",
            expected: "[1, inf)",
            value: 0.0,
        });
    }
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (bin, err) in pnr_errors(preds, ds, bins)? {
        sums[bin] += err;
        counts[bin] += 1;
    }
    Ok((0..bins)
        .map(|k| BinError {
            lo: k as f64 / bins as f64,
            hi: (k + 1) as f64 / bins as f64,
            mean_error: (counts[k] > 0).then(|| sums[k] / counts[k] as f64),
            count: counts[k],
        })
        .collect())
}

/// [`pnr_mae`] plus the per-position breakdown.
pub fn pnr_report(
    preds: &BTreeMap<String, PnrPrediction>,
    ds: &Dataset,
    bins: usize,
) -> Result<MetricsReport> {
    let mut report = pnr_mae(preds, ds)?;
    report.per_bin = Some(per_position_error(preds, ds, bins)?);
    Ok(report)
}

/// Bin with the lowest mean error among populated bins.
pub fn min_error_bin(rows: &[BinError]) -> Option<usize> {
    rows.iter()
        .enumerate()
        .filter_map(|(k, r)| r.mean_error.map(|m| (k, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}
