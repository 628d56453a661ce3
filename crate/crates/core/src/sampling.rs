//! Frame and window samplers.
//!
//! * [`tsn_sample`]: segment-based sparse sampling for clip classification.
//! * [`dense_windows`]: N overlapping fixed-length windows spread uniformly
//!   over a clip, scored one by one at test time.
//! * [`positive_window`] / [`negative_windows`]: balanced training windows
//!   that do or do not contain a PNR frame.
//!
//! Randomness is always derived from an explicit seed, so every sampler is a
//! pure function of its inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Clip, FrameWindow, PnrAnnotation};

pub const DEFAULT_WINDOW_LEN: usize = 32;

/// Seeded generator for one independent stream (e.g. one clip) of a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// One uniformly random frame per segment.
    TrainRandom,
    /// The center frame of each segment.
    TestUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub segments: usize,
    pub mode: SampleMode,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(segments: usize, mode: SampleMode, seed: u64) -> Result<Self> {
        if segments == 0 {
            return Err(Error::Domain {
                what: "segment count",
                expected: "[1, inf)",
                value: 0.0,
            });
        }
        Ok(Self {
            segments,
            mode,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowingConfig {
    /// Number of dense windows per clip.
    pub windows: usize,
    /// Window length in frames.
    pub window_len: usize,
    /// Maximum shift, in frames, applied to positive training windows.
    pub jitter: usize,
}

impl WindowingConfig {
    pub fn new(windows: usize, window_len: usize, jitter: usize) -> Result<Self> {
        if windows == 0 {
            return Err(Error::Domain {
                what: "window count",
                expected: "[1, inf)",
                value: 0.0,
            });
        }
        if window_len == 0 {
            return Err(Error::Domain {
                what: "window length",
                expected: "[1, inf)",
                value: 0.0,
            });
        }
        Ok(Self {
            windows,
            window_len,
            jitter,
        })
    }

    /// `windows` windows of the default length with jitter of a quarter window.
    pub fn with_count(windows: usize) -> Result<Self> {
        Self::new(windows, DEFAULT_WINDOW_LEN, DEFAULT_WINDOW_LEN / 4)
    }

    fn check_clip(&self, clip: &Clip) -> Result<()> {
        if clip.num_frames < self.window_len {
            Err(Error::ClipTooShort {
                clip_id: clip.clip_id.clone(),
                num_frames: clip.num_frames,
                window: self.window_len,
            })
        } else {
            Ok(())
        }
    }
}

/// Bounds `[lo, hi)` of segment `k` when `n` frames are split into `m` segments.
pub fn segment_bounds(k: usize, n: usize, m: usize) -> (usize, usize) {
    (k * n / m, (k + 1) * n / m)
}

/// One frame index per segment, non-decreasing.
///
/// When there are more segments than frames some segments are empty; those
/// reuse the frame just before them.
pub fn tsn_sample(clip: &Clip, cfg: &SamplerConfig) -> Vec<usize> {
    let n = clip.num_frames;
    let m = cfg.segments;
    let mut rng = stream_rng(cfg.seed, 0);
    (0..m)
        .map(|k| {
            let (lo, hi) = segment_bounds(k, n, m);
            if lo == hi {
                return lo.saturating_sub(1);
            }
            match cfg.mode {
                SampleMode::TrainRandom => rng.gen_range(lo..hi),
                SampleMode::TestUniform => (lo + hi - 1) / 2,
            }
        })
        .collect()
}

/// Start of dense window `k` of `count`: `round(k * slack / (count - 1))`, half up.
fn dense_start(k: usize, slack: usize, count: usize) -> usize {
    if count == 1 {
        return 0;
    }
    let denom = 2 * (count - 1);
    (2 * k * slack + count - 1) / denom
}

/// `N` windows of length `w`, the first at frame 0 and the last ending at the
/// clip's final frame. Starts repeat when the clip has fewer spare frames than
/// window gaps.
pub fn dense_windows(clip: &Clip, cfg: &WindowingConfig) -> Result<Vec<FrameWindow>> {
    cfg.check_clip(clip)?;
    let slack = clip.num_frames - cfg.window_len;
    Ok((0..cfg.windows)
        .map(|k| FrameWindow::with_len(dense_start(k, slack, cfg.windows), cfg.window_len))
        .collect())
}

/// A training window containing the clip's positive PNR frame.
///
/// The window is centered on the PNR, shifted uniformly by up to `jitter`
/// frames, then clamped so it stays inside the clip and still covers the PNR.
pub fn positive_window(
    ann: &PnrAnnotation,
    clip: &Clip,
    cfg: &WindowingConfig,
    seed: u64,
) -> Result<FrameWindow> {
    cfg.check_clip(clip)?;
    clip.check_frame(ann.positive_frame)?;
    let w = cfg.window_len as i64;
    let p = ann.positive_frame as i64;
    let shift = if cfg.jitter > 0 {
        let j = cfg.jitter as i64;
        stream_rng(seed, 0).gen_range(-j..=j)
    } else {
        0
    };
    let lo = (p - w + 1).max(0);
    let hi = p.min(clip.num_frames as i64 - w);
    let start = (p - w / 2 + shift).clamp(lo, hi);
    Ok(FrameWindow::with_len(start as usize, cfg.window_len))
}

/// Window starts whose windows contain none of the clip's PNR frames.
pub fn pnr_free_starts(ann: &PnrAnnotation, clip: &Clip, window_len: usize) -> Vec<usize> {
    if clip.num_frames < window_len {
        return Vec::new();
    }
    let last = clip.num_frames - window_len;
    // blocked[s] > 0 iff some PNR lies in [s, s + w)
    let mut delta = vec![0i64; last + 2];
    for p in ann.all_frames() {
        let lo = (p + 1).saturating_sub(window_len);
        let hi = p.min(last);
        if lo <= hi {
            delta[lo] += 1;
            delta[hi + 1] -= 1;
        }
    }
    let mut blocked = 0;
    (0..=last)
        .filter(|&s| {
            blocked += delta[s];
            blocked == 0
        })
        .collect()
}

/// `count` PNR-free windows drawn uniformly (with replacement) from all valid starts.
pub fn negative_windows(
    ann: &PnrAnnotation,
    clip: &Clip,
    cfg: &WindowingConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<FrameWindow>> {
    cfg.check_clip(clip)?;
    let starts = pnr_free_starts(ann, clip, cfg.window_len);
    if starts.is_empty() {
        return Err(Error::NegativeSpaceEmpty {
            clip_id: clip.clip_id.clone(),
            window: cfg.window_len,
        });
    }
    let mut rng = stream_rng(seed, 0);
    Ok((0..count)
        .map(|_| FrameWindow::with_len(starts[rng.gen_range(0..starts.len())], cfg.window_len))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(n: usize) -> Clip {
        Clip::new("c", 30.0, n).unwrap()
    }

    fn ann(c: &Clip, pos: usize, neg: Vec<usize>) -> PnrAnnotation {
        PnrAnnotation::new(c, pos, neg).unwrap()
    }

    // Segment centers found by scanning every frame for membership in
    // [k n / m, (k + 1) n / m) rounded down at both ends.
    fn brute_force_centers(n: usize, m: usize) -> Vec<usize> {
        (0..m)
            .map(|k| {
                let members: Vec<usize> = (0..n)
                    .filter(|&i| (i + 1) * m > k * n && (i + 1) * m <= (k + 1) * n)
                    .collect();
                members[(members.len() - 1) / 2]
            })
            .collect()
    }

    #[test]
    fn tsn_test_mode_centers() {
        let cfg = SamplerConfig::new(8, SampleMode::TestUniform, 0).unwrap();
        let frames = tsn_sample(&clip(240), &cfg);
        assert_eq!(frames, vec![14, 44, 74, 104, 134, 164, 194, 224]);
        assert_eq!(frames, brute_force_centers(240, 8));
        for (n, m) in [(100, 7), (31, 16), (239, 32), (5, 5)] {
            let cfg = SamplerConfig::new(m, SampleMode::TestUniform, 0).unwrap();
            assert_eq!(
                tsn_sample(&clip(n), &cfg),
                brute_force_centers(n, m),
                "n={n} m={m}"
            );
        }
    }

    #[test]
    fn tsn_identity_when_segments_equal_frames() {
        for mode in [SampleMode::TestUniform, SampleMode::TrainRandom] {
            let cfg = SamplerConfig::new(17, mode, 3).unwrap();
            assert_eq!(tsn_sample(&clip(17), &cfg), (0..17).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tsn_more_segments_than_frames() {
        let cfg = SamplerConfig::new(8, SampleMode::TestUniform, 0).unwrap();
        let frames = tsn_sample(&clip(3), &cfg);
        assert_eq!(frames.len(), 8);
        assert!(frames.windows(2).all(|p| p[0] <= p[1]));
        assert!(frames.iter().all(|&f| f < 3));
        assert_eq!(tsn_sample(&clip(1), &cfg), vec![0; 8]);
    }

    #[test]
    fn tsn_train_seeds_differ() {
        let a = tsn_sample(
            &clip(240),
            &SamplerConfig::new(8, SampleMode::TrainRandom, 1).unwrap(),
        );
        let b = tsn_sample(
            &clip(240),
            &SamplerConfig::new(8, SampleMode::TrainRandom, 2).unwrap(),
        );
        assert_ne!(a, b);
        assert!(SamplerConfig::new(0, SampleMode::TrainRandom, 1).is_err());
    }

    #[test]
    fn dense_window_examples() {
        let cfg = WindowingConfig::new(32, 32, 0).unwrap();
        let wins = dense_windows(&clip(240), &cfg).unwrap();
        assert_eq!(wins.len(), 32);
        assert_eq!(wins[0], FrameWindow::new(0, 32));
        assert_eq!(wins[1].start, 7);
        assert_eq!(wins[31], FrameWindow::new(208, 240));

        let two = WindowingConfig::new(2, 32, 0).unwrap();
        let starts: Vec<_> = dense_windows(&clip(240), &two)
            .unwrap()
            .iter()
            .map(|w| w.start)
            .collect();
        assert_eq!(starts, vec![0, 208]);

        let wins = dense_windows(&clip(32), &cfg).unwrap();
        assert!(wins.iter().all(|w| *w == FrameWindow::new(0, 32)));

        let one = WindowingConfig::new(1, 32, 0).unwrap();
        assert_eq!(
            dense_windows(&clip(240), &one).unwrap(),
            vec![FrameWindow::new(0, 32)]
        );

        assert!(matches!(
            dense_windows(&clip(31), &cfg),
            Err(Error::ClipTooShort { .. })
        ));
    }

    #[test]
    fn positive_window_examples() {
        let c = clip(240);
        let cfg = WindowingConfig::new(16, 32, 0).unwrap();
        assert_eq!(
            positive_window(&ann(&c, 120, vec![]), &c, &cfg, 0).unwrap(),
            FrameWindow::new(104, 136)
        );
        assert_eq!(
            positive_window(&ann(&c, 3, vec![]), &c, &cfg, 0).unwrap(),
            FrameWindow::new(0, 32)
        );
        assert_eq!(
            positive_window(&ann(&c, 238, vec![]), &c, &cfg, 0).unwrap(),
            FrameWindow::new(208, 240)
        );
    }

    #[test]
    fn positive_window_jitter_moves_window() {
        let c = clip(240);
        let cfg = WindowingConfig::new(16, 32, 8).unwrap();
        let a = ann(&c, 120, vec![]);
        let starts: std::collections::BTreeSet<_> = (0..200)
            .map(|s| positive_window(&a, &c, &cfg, s).unwrap().start)
            .collect();
        assert_eq!(
            starts.iter().copied().collect::<Vec<_>>(),
            (96..=112).collect::<Vec<_>>()
        );
    }

    #[test]
    fn negative_window_examples() {
        let c = clip(240);
        let cfg = WindowingConfig::new(16, 32, 0).unwrap();
        let a = ann(&c, 100, vec![]);
        let wins = negative_windows(&a, &c, &cfg, 500, 9).unwrap();
        assert!(wins
            .iter()
            .all(|w| w.start <= 68 || (101..=208).contains(&w.start)));
        assert!(wins.iter().all(|w| !w.contains(100)));

        let short = clip(32);
        let a = ann(&short, 10, vec![]);
        assert!(matches!(
            negative_windows(&a, &short, &cfg, 1, 0),
            Err(Error::NegativeSpaceEmpty { .. })
        ));
    }

    #[test]
    fn negative_windows_against_frame_scan() {
        let c = clip(240);
        let cfg = WindowingConfig::new(16, 32, 0).unwrap();
        let a = ann(&c, 100, vec![15, 201]);
        let scan: Vec<usize> = (0..=208)
            .filter(|&s| (s..s + 32).all(|f| f != 100 && f != 15 && f != 201))
            .collect();
        assert_eq!(pnr_free_starts(&a, &c, 32), scan);
        let wins = negative_windows(&a, &c, &cfg, 5, 4).unwrap();
        assert_eq!(wins.len(), 5);
        for w in wins {
            assert!((w.start..w.end).all(|f| f != 100 && f != 15 && f != 201));
        }
    }

    proptest! {
        #[test]
        fn tsn_train_in_segment(n in 1usize..600, m in 1usize..64, seed in any::<u64>()) {
            let cfg = SamplerConfig::new(m, SampleMode::TrainRandom, seed).unwrap();
            let frames = tsn_sample(&clip(n), &cfg);
            prop_assert_eq!(frames.len(), m);
            prop_assert!(frames.windows(2).all(|p| p[0] <= p[1]));
            for (k, &f) in frames.iter().enumerate() {
                let (lo, hi) = segment_bounds(k, n, m);
                if lo < hi {
                    prop_assert!(lo <= f && f < hi);
                }
            }
        }

        #[test]
        fn dense_windows_anchor_and_cover(n in 32usize..600, count in 2usize..64) {
            let cfg = WindowingConfig::new(count, 32, 0).unwrap();
            let wins = dense_windows(&clip(n), &cfg).unwrap();
            prop_assert_eq!(wins[0].start, 0);
            prop_assert_eq!(wins[count - 1].end, n);
            prop_assert!(wins.windows(2).all(|p| p[0].start <= p[1].start));
            if count * 32 >= n {
                let covered = (0..n).all(|f| wins.iter().any(|w| w.contains(f)));
                prop_assert!(covered);
            }
        }

        #[test]
        fn positive_window_contains_pnr(n in 32usize..400, pos_seed in any::<u64>(), jitter in 0usize..40, seed in any::<u64>()) {
            let c = clip(n);
            let a = ann(&c, (pos_seed % n as u64) as usize, vec![]);
            let cfg = WindowingConfig::new(4, 32, jitter).unwrap();
            let w = positive_window(&a, &c, &cfg, seed).unwrap();
            prop_assert!(w.contains(a.positive_frame));
            prop_assert!(w.end <= n);
            prop_assert_eq!(w.len(), 32);
        }
    }
}
