//! Temporal data model shared by every stage of the pipeline.
//!
//! Frames are plain indices. A clip of `n` frames spans indices `0..n`, and
//! the relative position ("fraction") of frame `i` is `i / (n - 1)`, so the
//! first frame sits at 0.0 and the last at 1.0 regardless of frame rate.
//! Single-frame clips map every fraction to frame 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A video clip: the coordinate system for annotations, windows and predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub clip_id: String,
    pub fps: f64,
    pub num_frames: usize,
}

impl Clip {
    pub fn new(clip_id: impl Into<String>, fps: f64, num_frames: usize) -> Result<Self> {
        let clip_id = clip_id.into();
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::validation(
                &clip_id,
                format!("fps must be positive, got {fps}"),
            ));
        }
        if num_frames == 0 {
            return Err(Error::validation(&clip_id, "num_frames must be at least 1"));
        }
        Ok(Self {
            clip_id,
            fps,
            num_frames,
        })
    }

    pub fn duration_sec(&self) -> f64 {
        self.num_frames as f64 / self.fps
    }

    /// Timestamp of a (possibly fractional) frame position.
    pub fn frame_time(&self, frame: f64) -> f64 {
        frame / self.fps
    }

    pub fn check_frame(&self, frame: usize) -> Result<()> {
        if frame < self.num_frames {
            Ok(())
        } else {
            Err(Error::Bounds {
                context: format!("clip {}", self.clip_id),
                index: frame,
                len: self.num_frames,
            })
        }
    }

    pub fn fraction_of(&self, frame: usize) -> Result<Fraction> {
        self.check_frame(frame)?;
        Ok(frame_to_fraction_unchecked(frame, self.num_frames))
    }

    pub fn check_window(&self, win: FrameWindow) -> Result<()> {
        if win.start < win.end && win.end <= self.num_frames {
            Ok(())
        } else {
            Err(Error::validation(
                &self.clip_id,
                format!(
                    "window [{}, {}) outside clip of {} frames",
                    win.start, win.end, self.num_frames
                ),
            ))
        }
    }
}

/// Ground truth for point-of-no-return localization.
///
/// `positive_frame` is the clip's own PNR. `negative_frames` are PNR frames of
/// overlapping clips that happen to be visible here; they look identical to a
/// scorer but do not count as correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnrAnnotation {
    pub clip_id: String,
    pub positive_frame: usize,
    pub negative_frames: Vec<usize>,
}

impl PnrAnnotation {
    pub fn new(clip: &Clip, positive_frame: usize, negative_frames: Vec<usize>) -> Result<Self> {
        let ann = Self {
            clip_id: clip.clip_id.clone(),
            positive_frame,
            negative_frames,
        };
        ann.validate(clip)?;
        Ok(ann)
    }

    pub fn validate(&self, clip: &Clip) -> Result<()> {
        if self.clip_id != clip.clip_id {
            return Err(Error::validation(
                &self.clip_id,
                format!("annotation attached to clip {}", clip.clip_id),
            ));
        }
        clip.check_frame(self.positive_frame)?;
        for &f in &self.negative_frames {
            clip.check_frame(f)?;
        }
        if self.negative_frames.contains(&self.positive_frame) {
            return Err(Error::validation(
                &self.clip_id,
                format!(
                    "positive frame {} also listed as negative",
                    self.positive_frame
                ),
            ));
        }
        Ok(())
    }

    /// Positive frame followed by every negative frame.
    pub fn all_frames(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.positive_frame).chain(self.negative_frames.iter().copied())
    }

    pub fn pnr_count(&self) -> usize {
        1 + self.negative_frames.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsccAnnotation {
    pub clip_id: String,
    pub state_change: bool,
}

/// Half-open frame span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameWindow {
    pub start: usize,
    pub end: usize,
}

impl FrameWindow {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end, "empty window [{start}, {end})");
        Self { start, end }
    }

    pub fn with_len(start: usize, len: usize) -> Self {
        Self::new(start, start + len)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame < self.end
    }

    /// Twice the center frame position. Always an integer, which keeps
    /// center comparisons exact.
    pub fn center_x2(&self) -> usize {
        2 * self.start + self.len() - 1
    }

    /// Center frame position `start + (len - 1) / 2`; half-integral for even lengths.
    pub fn center_frame(&self) -> f64 {
        self.center_x2() as f64 / 2.0
    }

    /// Fraction of the clip at the window center; 0 for single-frame clips.
    pub fn center_fraction(&self, num_frames: usize) -> f64 {
        if num_frames < 2 {
            0.0
        } else {
            self.center_frame() / (num_frames - 1) as f64
        }
    }
}

/// Relative temporal position of a frame within its clip, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Fraction(f64);

impl Fraction {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                what: "fraction",
                expected: "[0, 1]",
                value,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Histogram bin of this fraction among `bins` equal bins over `[0, 1]`,
    /// last bin right-closed.
    pub fn bin(self, bins: usize) -> usize {
        ((self.0 * bins as f64) as usize).min(bins - 1)
    }
}

impl TryFrom<f64> for Fraction {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Fraction::new(value)
    }
}

impl From<Fraction> for f64 {
    fn from(f: Fraction) -> f64 {
        f.0
    }
}

/// A window with a scorer confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredWindow {
    pub window: FrameWindow,
    pub confidence: f64,
}

/// Scored windows for one clip from one scorer, ordered by `(start, end)`.
///
/// Window geometries are unique within a series; overlapping windows are fine.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    clip_id: String,
    windows: Vec<ScoredWindow>,
}

impl ScoreSeries {
    pub fn new(clip_id: impl Into<String>, mut windows: Vec<ScoredWindow>) -> Result<Self> {
        let clip_id = clip_id.into();
        for sw in &windows {
            if !(0.0..=1.0).contains(&sw.confidence) {
                return Err(Error::validation(
                    &clip_id,
                    format!("confidence {} outside [0, 1]", sw.confidence),
                ));
            }
            if sw.window.is_empty() {
                return Err(Error::validation(
                    &clip_id,
                    format!("empty window [{}, {})", sw.window.start, sw.window.end),
                ));
            }
        }
        windows.sort_by_key(|sw| sw.window);
        if let Some(pair) = windows.windows(2).find(|p| p[0].window == p[1].window) {
            return Err(Error::validation(
                &clip_id,
                format!(
                    "window [{}, {}) scored twice",
                    pair[0].window.start, pair[0].window.end
                ),
            ));
        }
        Ok(Self { clip_id, windows })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn windows(&self) -> &[ScoredWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn check_in(&self, clip: &Clip) -> Result<()> {
        if self.clip_id != clip.clip_id {
            return Err(Error::validation(
                &self.clip_id,
                format!("series checked against clip {}", clip.clip_id),
            ));
        }
        self.windows
            .iter()
            .try_for_each(|sw| clip.check_window(sw.window))
    }
}

pub(crate) fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn frame_to_fraction_unchecked(frame: usize, num_frames: usize) -> Fraction {
    if num_frames < 2 {
        Fraction(0.0)
    } else {
        Fraction(frame as f64 / (num_frames - 1) as f64)
    }
}

pub fn frame_to_fraction(frame: usize, num_frames: usize) -> Result<Fraction> {
    if frame >= num_frames {
        return Err(Error::Bounds {
            context: "frame_to_fraction".to_string(),
            index: frame,
            len: num_frames,
        });
    }
    Ok(frame_to_fraction_unchecked(frame, num_frames))
}

/// Nearest frame to a fraction, rounding half up.
pub fn fraction_to_frame(fraction: f64, num_frames: usize) -> Result<usize> {
    let f = Fraction::new(fraction)?;
    if num_frames == 0 {
        return Err(Error::Bounds {
            context: "fraction_to_frame".to_string(),
            index: 0,
            len: 0,
        });
    }
    let frame = round_half_up(f.value() * (num_frames - 1) as f64) as usize;
    Ok(frame.min(num_frames - 1))
}

/// Histogram bin of `frame`'s fraction in a clip of `num_frames`, computed in
/// integer arithmetic so that bin edges are exact.
pub fn position_bin(frame: usize, num_frames: usize, bins: usize) -> usize {
    debug_assert!(bins >= 1 && frame < num_frames);
    if num_frames < 2 {
        return 0;
    }
    let denom = (num_frames - 1) as u128;
    ((frame as u128 * bins as u128 / denom) as usize).min(bins - 1)
}

/// Time of the window's center frame, in seconds.
pub fn window_center_time(win: FrameWindow, clip: &Clip) -> Result<f64> {
    clip.check_window(win)?;
    Ok(clip.frame_time(win.center_frame()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip240() -> Clip {
        Clip::new("c", 30.0, 240).unwrap()
    }

    #[test]
    fn clip_rejects_bad_fields() {
        assert!(Clip::new("a", 0.0, 10).is_err());
        assert!(Clip::new("a", f64::NAN, 10).is_err());
        assert!(Clip::new("a", 30.0, 0).is_err());
        let c = Clip::new("a", 30.0, 240).unwrap();
        assert_eq!(c.duration_sec(), 8.0);
    }

    #[test]
    fn frame_to_fraction_examples() {
        assert_eq!(frame_to_fraction(0, 240).unwrap().value(), 0.0);
        assert_eq!(frame_to_fraction(239, 240).unwrap().value(), 1.0);
        let f = frame_to_fraction(103, 240).unwrap().value();
        assert!((f - 0.430_962_343).abs() < 1e-9);
        assert_eq!(fraction_to_frame(f, 240).unwrap(), 103);
        assert_eq!(frame_to_fraction(0, 1).unwrap().value(), 0.0);
    }

    #[test]
    fn frame_to_fraction_out_of_bounds() {
        assert!(matches!(
            frame_to_fraction(240, 240),
            Err(Error::Bounds { index: 240, .. })
        ));
        let err = clip240().fraction_of(300).unwrap_err();
        assert!(err.to_string().contains("clip c"));
    }

    #[test]
    fn fraction_to_frame_examples() {
        assert_eq!(fraction_to_frame(0.43, 240).unwrap(), 103);
        assert_eq!(fraction_to_frame(0.0, 240).unwrap(), 0);
        assert_eq!(fraction_to_frame(1.0, 1).unwrap(), 0);
        assert_eq!(fraction_to_frame(0.5, 240).unwrap(), 120);
        assert!(fraction_to_frame(1.01, 240).is_err());
        assert!(fraction_to_frame(-0.1, 240).is_err());
        assert!(fraction_to_frame(f64::NAN, 240).is_err());
    }

    #[test]
    fn window_center_examples() {
        let c = clip240();
        let t = window_center_time(FrameWindow::new(0, 32), &c).unwrap();
        assert!((t - 15.5 / 30.0).abs() < 1e-12);
        let t = window_center_time(FrameWindow::new(208, 240), &c).unwrap();
        assert!((t - 7.45).abs() < 1e-12);
        assert_eq!(window_center_time(FrameWindow::new(0, 1), &c).unwrap(), 0.0);
        assert!(window_center_time(FrameWindow::new(220, 241), &c).is_err());
    }

    #[test]
    fn pnr_annotation_validation() {
        let c = clip240();
        assert!(PnrAnnotation::new(&c, 103, vec![10, 200]).is_ok());
        assert!(PnrAnnotation::new(&c, 240, vec![]).is_err());
        assert!(PnrAnnotation::new(&c, 10, vec![240]).is_err());
        assert!(PnrAnnotation::new(&c, 10, vec![10]).is_err());
    }

    #[test]
    fn position_bin_edges() {
        // n = 101 makes fraction = frame / 100.
        assert_eq!(position_bin(41, 101, 10), 4);
        assert_eq!(position_bin(50, 101, 10), 5);
        assert_eq!(position_bin(100, 101, 10), 9);
        assert_eq!(position_bin(0, 1, 10), 0);
        assert_eq!(Fraction::new(1.0).unwrap().bin(10), 9);
    }

    #[test]
    fn score_series_sorts_and_rejects_duplicates() {
        let sw = |s, c| ScoredWindow {
            window: FrameWindow::with_len(s, 32),
            confidence: c,
        };
        let series = ScoreSeries::new("c", vec![sw(96, 0.1), sw(32, 0.2)]).unwrap();
        let starts: Vec<_> = series.windows().iter().map(|w| w.window.start).collect();
        assert_eq!(starts, vec![32, 96]);
        assert!(ScoreSeries::new("c", vec![sw(32, 0.1), sw(32, 0.2)]).is_err());
        assert!(ScoreSeries::new("c", vec![sw(32, 1.3)]).is_err());
        assert!(ScoreSeries::new("c", vec![sw(32, f64::NAN)]).is_err());
    }

    proptest! {
        #[test]
        fn fraction_round_trip(n in 2usize..5000, seed in any::<u64>()) {
            let i = (seed % n as u64) as usize;
            let f = frame_to_fraction(i, n).unwrap();
            prop_assert_eq!(fraction_to_frame(f.value(), n).unwrap(), i);
        }

        #[test]
        fn fraction_strictly_increasing(n in 2usize..5000, seed in any::<u64>()) {
            let i = (seed % (n as u64 - 1)) as usize;
            prop_assert!(frame_to_fraction(i, n).unwrap() < frame_to_fraction(i + 1, n).unwrap());
        }

        #[test]
        fn center_time_inside_window(start in 0usize..500, len in 1usize..100, fps in 1.0f64..120.0) {
            let clip = Clip::new("p", fps, start + len + 3).unwrap();
            let win = FrameWindow::with_len(start, len);
            let t = window_center_time(win, &clip).unwrap();
            prop_assert!(t >= start as f64 / fps);
            prop_assert!(t < (start + len) as f64 / fps);
        }

        #[test]
        fn position_bin_matches_fraction_bin(n in 2usize..3000, seed in any::<u64>(), bins in 1usize..40) {
            let i = (seed % n as u64) as usize;
            let float_bin = frame_to_fraction(i, n).unwrap().bin(bins);
            let exact = position_bin(i, n, bins);
            // float binning may only disagree when the fraction sits on an edge
            if float_bin != exact {
                prop_assert_eq!((i * bins) % (n - 1), 0);
            }
        }
    }
}
