//! PNR selection from dense window scores, positional baselines, and the
//! segmentation oracle.
//!
//! A clip typically shows several PNR-like moments (its own plus those of
//! overlapping clips) that a scorer cannot tell apart. Selection therefore
//! keeps every window whose confidence exceeds a threshold and, among them,
//! picks the one whose center is nearest a fixed prior position in the clip.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::model::{
    fraction_to_frame, round_half_up, Clip, Fraction, FrameWindow, PnrAnnotation, ScoreSeries,
};
use crate::sampling::{dense_windows, WindowingConfig};

pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_PRIOR_FRACTION: f64 = 0.43;

/// What to predict when no window clears the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    /// The frame at the prior fraction.
    #[default]
    PriorPoint,
    /// The center of the most confident window.
    ArgmaxConfidence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Windows must score strictly above this to become candidates. Values
    /// above 1 disable the filter and force the fallback.
    pub threshold: f64,
    pub prior_fraction: f64,
    pub fallback: Fallback,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            prior_fraction: DEFAULT_PRIOR_FRACTION,
            fallback: Fallback::PriorPoint,
        }
    }
}

impl SelectionConfig {
    pub fn new(threshold: f64, prior_fraction: f64, fallback: Fallback) -> Result<Self> {
        if threshold.is_nan() {
            return Err(Error::Domain {
                what: "threshold",
                expected: "a number",
                value: threshold,
            });
        }
        Fraction::new(prior_fraction)?;
        Ok(Self {
            threshold,
            prior_fraction,
            fallback,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionSource {
    Selected,
    FallbackPrior,
    FallbackArgmax,
    BaselineCenter,
    BaselineFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnrPrediction {
    pub clip_id: String,
    pub time_sec: f64,
    pub frame: usize,
    pub source: PredictionSource,
}

impl PnrPrediction {
    fn at_window(clip: &Clip, win: FrameWindow, source: PredictionSource) -> Self {
        let center = win.center_frame();
        Self {
            clip_id: clip.clip_id.clone(),
            time_sec: clip.frame_time(center),
            frame: (round_half_up(center) as usize).min(clip.num_frames - 1),
            source,
        }
    }

    fn at_frame(clip: &Clip, frame: usize, source: PredictionSource) -> Self {
        Self {
            clip_id: clip.clip_id.clone(),
            time_sec: clip.frame_time(frame as f64),
            frame,
            source,
        }
    }

    pub fn abs_error(&self, clip: &Clip, ann: &PnrAnnotation) -> f64 {
        (self.time_sec - clip.frame_time(ann.positive_frame as f64)).abs()
    }
}

pub fn select_pnr(
    series: &ScoreSeries,
    clip: &Clip,
    cfg: &SelectionConfig,
) -> Result<PnrPrediction> {
    if series.is_empty() {
        return Err(Error::EmptyInput("score series has no windows"));
    }
    series.check_in(clip)?;

    // Windows are sorted by (start, end); strict comparisons keep the earliest on ties.
    let mut best: Option<(FrameWindow, f64)> = None;
    for sw in series
        .windows()
        .iter()
        .filter(|sw| sw.confidence > cfg.threshold)
    {
        let d = (sw.window.center_fraction(clip.num_frames) - cfg.prior_fraction).abs();
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((sw.window, d));
        }
    }
    if let Some((win, _)) = best {
        return Ok(PnrPrediction::at_window(
            clip,
            win,
            PredictionSource::Selected,
        ));
    }

    match cfg.fallback {
        Fallback::PriorPoint => {
            let frame = fraction_to_frame(cfg.prior_fraction, clip.num_frames)?;
            Ok(PnrPrediction::at_frame(
                clip,
                frame,
                PredictionSource::FallbackPrior,
            ))
        }
        Fallback::ArgmaxConfidence => {
            let mut top = series.windows()[0];
            for sw in &series.windows()[1..] {
                if sw.confidence > top.confidence {
                    top = *sw;
                }
            }
            Ok(PnrPrediction::at_window(
                clip,
                top.window,
                PredictionSource::FallbackArgmax,
            ))
        }
    }
}

/// Always predicts the middle frame of the clip.
pub fn baseline_center(clip: &Clip) -> PnrPrediction {
    let frame = fraction_to_frame(0.5, clip.num_frames).expect("0.5 is a valid fraction");
    PnrPrediction::at_frame(clip, frame, PredictionSource::BaselineCenter)
}

/// Always predicts the frame at a fixed fraction of the clip.
pub fn baseline_fraction(clip: &Clip, fraction: f64) -> Result<PnrPrediction> {
    let frame = fraction_to_frame(fraction, clip.num_frames)?;
    Ok(PnrPrediction::at_frame(
        clip,
        frame,
        PredictionSource::BaselineFraction,
    ))
}

/// Smallest error reachable by predicting any dense window center.
pub fn oracle_error(ann: &PnrAnnotation, clip: &Clip, cfg: &WindowingConfig) -> Result<f64> {
    let target_x2 = 2 * ann.positive_frame;
    let best_x2 = dense_windows(clip, cfg)?
        .into_iter()
        .map(|w| w.center_x2().abs_diff(target_x2))
        .min()
        .expect("at least one dense window");
    Ok(clip.frame_time(best_x2 as f64 / 2.0))
}

/// Runs [`select_pnr`] on every scored clip.
pub fn localize_all(
    scores: &BTreeMap<String, ScoreSeries>,
    ds: &Dataset,
    cfg: &SelectionConfig,
) -> Result<BTreeMap<String, PnrPrediction>> {
    scores
        .iter()
        .map(|(id, series)| {
            let clip = ds.clip(id).ok_or_else(|| Error::UnknownClip {
                clip_id: id.clone(),
            })?;
            select_pnr(series, clip, cfg).map(|p| (id.clone(), p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScoredWindow;

    fn clip(n: usize) -> Clip {
        Clip::new("c", 30.0, n).unwrap()
    }

    fn series(items: &[(usize, usize, f64)]) -> ScoreSeries {
        ScoreSeries::new(
            "c",
            items
                .iter()
                .map(|&(s, e, c)| ScoredWindow {
                    window: FrameWindow::new(s, e),
                    confidence: c,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn nearest_candidate_to_prior_wins() {
        // n = 201: center frame 60 -> 0.30, center 100 -> 0.50.
        let c = clip(201);
        let s = series(&[(59, 62, 0.75), (99, 102, 0.72), (150, 153, 0.2)]);
        let p = select_pnr(&s, &c, &SelectionConfig::default()).unwrap();
        assert_eq!(p.frame, 100);
        assert_eq!(p.source, PredictionSource::Selected);
    }

    #[test]
    fn single_candidate_selected() {
        let c = clip(201);
        let s = series(&[(159, 162, 0.9), (20, 23, 0.1)]);
        let p = select_pnr(&s, &c, &SelectionConfig::default()).unwrap();
        assert_eq!((p.frame, p.source), (160, PredictionSource::Selected));
    }

    #[test]
    fn threshold_is_strict() {
        let c = clip(201);
        let s = series(&[(159, 162, 0.7)]);
        let p = select_pnr(&s, &c, &SelectionConfig::default()).unwrap();
        assert_eq!(p.source, PredictionSource::FallbackPrior);
    }

    #[test]
    fn prior_fallback() {
        let c = clip(240);
        let s = series(&[(0, 32, 0.3), (100, 132, 0.69)]);
        let p = select_pnr(&s, &c, &SelectionConfig::default()).unwrap();
        assert_eq!(p.frame, 103);
        assert!((p.time_sec - 103.0 / 30.0).abs() < 1e-12);
        assert_eq!(p.source, PredictionSource::FallbackPrior);
        assert_eq!(p.frame, baseline_fraction(&c, 0.43).unwrap().frame);
    }

    #[test]
    fn argmax_fallback_prefers_earlier_on_ties() {
        let c = clip(240);
        let cfg = SelectionConfig::new(0.7, 0.43, Fallback::ArgmaxConfidence).unwrap();
        let s = series(&[(100, 132, 0.5), (0, 32, 0.5), (50, 82, 0.1)]);
        let p = select_pnr(&s, &c, &cfg).unwrap();
        assert_eq!(p.source, PredictionSource::FallbackArgmax);
        assert!((p.time_sec - 15.5 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn prior_ties_prefer_earlier() {
        // Centers 40 and 60 are equidistant from frame 50 (prior 0.5 of 101 frames).
        let c = clip(101);
        let cfg = SelectionConfig::new(0.7, 0.5, Fallback::PriorPoint).unwrap();
        let s = series(&[(59, 62, 0.9), (39, 42, 0.8)]);
        assert_eq!(select_pnr(&s, &c, &cfg).unwrap().frame, 40);
    }

    #[test]
    fn select_errors() {
        let c = clip(240);
        let empty = ScoreSeries::new("c", vec![]).unwrap();
        assert!(matches!(
            select_pnr(&empty, &c, &SelectionConfig::default()),
            Err(Error::EmptyInput(_))
        ));
        let outside = series(&[(230, 250, 0.9)]);
        assert!(select_pnr(&outside, &c, &SelectionConfig::default()).is_err());
        assert!(SelectionConfig::new(0.7, 1.2, Fallback::PriorPoint).is_err());
    }

    #[test]
    fn baselines() {
        let p = baseline_center(&clip(240));
        assert_eq!(p.frame, 120);
        assert!((p.time_sec - 4.0).abs() < 1e-12);
        assert_eq!(baseline_center(&clip(1)).frame, 0);
        let p = baseline_fraction(&clip(240), 0.43).unwrap();
        assert_eq!(p.frame, 103);
        assert_eq!(p.source, PredictionSource::BaselineFraction);
        assert_eq!(baseline_fraction(&clip(240), 0.0).unwrap().frame, 0);
        assert!(baseline_fraction(&clip(240), 1.5).is_err());
    }

    #[test]
    fn oracle_examples() {
        let c = clip(240);
        let two = WindowingConfig::new(2, 32, 0).unwrap();
        let a = PnrAnnotation::new(&c, 120, vec![]).unwrap();
        assert!((oracle_error(&a, &c, &two).unwrap() - 3.45).abs() < 1e-12);

        // Odd window length puts centers on integer frames.
        let odd = WindowingConfig::new(2, 31, 0).unwrap();
        let a = PnrAnnotation::new(&c, 15, vec![]).unwrap();
        assert_eq!(oracle_error(&a, &c, &odd).unwrap(), 0.0);

        let short = clip(20);
        let a = PnrAnnotation::new(&short, 3, vec![]).unwrap();
        assert!(matches!(
            oracle_error(&a, &short, &two),
            Err(Error::ClipTooShort { .. })
        ));
    }
}
