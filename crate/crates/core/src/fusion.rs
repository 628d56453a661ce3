//! Score-level fusion of heterogeneous scorers.
//!
//! Scorers may use different window counts or lengths for the same clip, so
//! PNR fusion evaluates every distinct window geometry from any input. At each
//! of those points, every scorer contributes the confidence of its own window
//! with the nearest center, and the contributions are averaged.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Clip, FrameWindow, ScoreSeries, ScoredWindow};

/// Probability at or above which a clip is labelled as a state change.
pub const OSCC_DECISION_THRESHOLD: f64 = 0.5;

pub fn oscc_label(prob: f64) -> bool {
    prob >= OSCC_DECISION_THRESHOLD
}

// Sums in sorted order so the result does not depend on input order, then
// clamps away any rounding excursion beyond the inputs' range.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let sum: f64 = values.iter().sum();
    let mean = sum / values.len() as f64;
    mean.clamp(values[0], values[values.len() - 1])
}

/// Arithmetic mean of one clip's state-change probabilities.
pub fn fuse_oscc(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyInput("no probabilities to fuse"));
    }
    if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain {
            what: "probability",
            expected: "[0, 1]",
            value: bad,
        });
    }
    Ok(order_free_mean(&mut probs.to_vec()))
}

/// Fused confidences at the union of all input window geometries, ordered by center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedSeries {
    pub clip_id: String,
    pub points: Vec<ScoredWindow>,
}

impl FusedSeries {
    /// The fused points as an ordinary series, ready for selection or emission.
    pub fn into_series(self) -> ScoreSeries {
        ScoreSeries::new(self.clip_id, self.points).expect("fused points are valid and unique")
    }
}

/// Confidence of the window in `series` whose center is nearest `point`;
/// the earliest window wins ties.
// An identical window beats another one with the same center; remaining ties
// go to the earlier window.
fn nearest_confidence(series: &ScoreSeries, point: FrameWindow) -> f64 {
    let target = point.center_x2();
    let key = |w: FrameWindow| (w.center_x2().abs_diff(target), w != point);
    let mut best = series.windows()[0];
    let mut best_d = key(best.window);
    for sw in &series.windows()[1..] {
        let d = key(sw.window);
        if d < best_d {
            best = *sw;
            best_d = d;
        }
    }
    best.confidence
}

pub fn fuse_pnr(series_list: &[ScoreSeries], clip: &Clip) -> Result<FusedSeries> {
    if series_list.is_empty() {
        return Err(Error::EmptyInput("no score series to fuse"));
    }
    for s in series_list {
        if s.is_empty() {
            return Err(Error::EmptyInput("score series has no windows"));
        }
        s.check_in(clip)?;
    }

    let mut geometry: Vec<FrameWindow> = series_list
        .iter()
        .flat_map(|s| s.windows().iter().map(|sw| sw.window))
        .collect();
    geometry.sort_by_key(|w| (w.center_x2(), w.start));
    geometry.dedup();

    let mut contributions = Vec::with_capacity(series_list.len());
    let points = geometry
        .into_iter()
        .map(|window| {
            contributions.clear();
            contributions.extend(series_list.iter().map(|s| nearest_confidence(s, window)));
            ScoredWindow {
                window,
                confidence: order_free_mean(&mut contributions),
            }
        })
        .collect();

    Ok(FusedSeries {
        clip_id: clip.clip_id.clone(),
        points,
    })
}
