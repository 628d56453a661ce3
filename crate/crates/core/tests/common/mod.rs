//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use pnrkit::localization::Fallback;
use pnrkit::sampling::{dense_windows, WindowingConfig};
use pnrkit::{Clip, FrameWindow, ScoreSeries, ScoredWindow};

/// Exhaustive filter-then-argmin selection, written from the definition:
/// keep windows scoring above the threshold, sort them by distance of the
/// center fraction to the prior (then by position), take the first.
/// Returns the predicted time in seconds.
pub fn reference_select(
    windows: &[ScoredWindow],
    clip: &Clip,
    threshold: f64,
    prior: f64,
    fallback: Fallback,
) -> f64 {
    let n = clip.num_frames;
    let center = |w: &FrameWindow| w.start as f64 + (w.end - w.start - 1) as f64 / 2.0;
    let fraction = |w: &FrameWindow| {
        if n < 2 {
            0.0
        } else {
            center(w) / (n - 1) as f64
        }
    };

    let mut candidates: Vec<&ScoredWindow> = windows
        .iter()
        .filter(|sw| sw.confidence > threshold)
        .collect();
    if !candidates.is_empty() {
        candidates.sort_by(|a, b| {
            let da = (fraction(&a.window) - prior).abs();
            let db = (fraction(&b.window) - prior).abs();
            da.partial_cmp(&db)
                .unwrap()
                .then(a.window.start.cmp(&b.window.start))
                .then(a.window.end.cmp(&b.window.end))
        });
        return center(&candidates[0].window) / clip.fps;
    }
    match fallback {
        Fallback::PriorPoint => {
            let frame = (prior * (n - 1) as f64 + 0.5).floor();
            frame / clip.fps
        }
        Fallback::ArgmaxConfidence => {
            let mut all: Vec<&ScoredWindow> = windows.iter().collect();
            all.sort_by(|a, b| {
                b.confidence
                    .partial_cmp(&a.confidence)
                    .unwrap()
                    .then(a.window.start.cmp(&b.window.start))
                    .then(a.window.end.cmp(&b.window.end))
            });
            center(&all[0].window) / clip.fps
        }
    }
}

/// Confidence drawn either from a coarse grid (to provoke exact ties and
/// threshold hits) or uniformly.
pub fn random_confidence(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.5) {
        rng.gen_range(0..=10) as f64 / 10.0
    } else {
        rng.gen()
    }
}

/// A random clip with a dense series of `2..=64` windows.
pub fn random_dense_series(rng: &mut impl Rng, id: &str) -> (Clip, ScoreSeries) {
    let window_len = rng.gen_range(1..=48);
    let n = rng.gen_range(window_len..=window_len + 400);
    let count = rng.gen_range(2..=64);
    let fps = [24.0, 25.0, 30.0, 60.0][rng.gen_range(0..4)];
    let clip = Clip::new(id, fps, n).unwrap();
    let cfg = WindowingConfig::new(count, window_len, 0).unwrap();
    let mut windows = dense_windows(&clip, &cfg).unwrap();
    windows.dedup();
    let mut scored: Vec<ScoredWindow> = windows
        .into_iter()
        .map(|window| ScoredWindow {
            window,
            confidence: random_confidence(rng),
        })
        .collect();
    scored.shuffle(rng);
    let series = ScoreSeries::new(id, scored).unwrap();
    (clip, series)
}

/// A random series of arbitrary (possibly differently sized) windows.
pub fn random_free_series(rng: &mut impl Rng, clip: &Clip, max_windows: usize) -> ScoreSeries {
    let distinct = clip.num_frames * (clip.num_frames + 1) / 2;
    let count = rng.gen_range(1..=max_windows.min(distinct));
    let mut windows: Vec<ScoredWindow> = Vec::new();
    while windows.len() < count {
        let start = rng.gen_range(0..clip.num_frames);
        let end = rng.gen_range(start + 1..=clip.num_frames);
        let window = FrameWindow::new(start, end);
        if windows.iter().all(|w| w.window != window) {
            windows.push(ScoredWindow {
                window,
                confidence: random_confidence(rng),
            });
        }
    }
    ScoreSeries::new(clip.clip_id.clone(), windows).unwrap()
}
