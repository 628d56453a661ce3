//! Line-oriented JSON record formats and dataset statistics.
//!
//! Every file is UTF-8 with one JSON object per line; blank lines are skipped
//! and unknown fields are rejected. Emitters write records sorted by clip id
//! (and by window within a clip), so identical input always produces
//! identical bytes.
//!
//! Annotation record:
//!
//! ```text
//! {"clip_id":"a","fps":30.0,"num_frames":240,"state_change":true,"pnr_frame":103,"other_pnr_frames":[12,200]}
//! ```
//!
//! `state_change`, `pnr_frame` and `other_pnr_frames` are optional, but
//! `other_pnr_frames` requires `pnr_frame`.
//!
//! PNR score record: `{"clip_id":"a","start":0,"end":32,"confidence":0.81}`
//!
//! OSCC score record: `{"clip_id":"a","prob":0.73}`
//!
//! PNR prediction record:
//! `{"clip_id":"a","time_sec":3.4333333333333336,"frame":103,"source":"selected"}`
//!
//! OSCC prediction record: `{"clip_id":"a","state_change":true}`, or an OSCC
//! score record, which is read as a state change when `prob >= 0.5`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::oscc_label;
use crate::localization::PnrPrediction;
use crate::model::{
    position_bin, Clip, FrameWindow, OsccAnnotation, PnrAnnotation, ScoreSeries, ScoredWindow,
};

/// Clips plus their (optional) PNR and OSCC ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    clips: BTreeMap<String, Clip>,
    pnr: BTreeMap<String, PnrAnnotation>,
    oscc: BTreeMap<String, OsccAnnotation>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a clip with its annotations, validating every invariant.
    pub fn insert(
        &mut self,
        clip: Clip,
        pnr: Option<PnrAnnotation>,
        oscc: Option<OsccAnnotation>,
    ) -> Result<()> {
        if self.clips.contains_key(&clip.clip_id) {
            return Err(Error::Conflict {
                clip_id: clip.clip_id,
            });
        }
        if let Some(ann) = &pnr {
            ann.validate(&clip)?;
        }
        if let Some(ann) = &oscc {
            if ann.clip_id != clip.clip_id {
                return Err(Error::validation(
                    &ann.clip_id,
                    format!("annotation attached to clip {}", clip.clip_id),
                ));
            }
        }
        let id = clip.clip_id.clone();
        if let Some(ann) = pnr {
            self.pnr.insert(id.clone(), ann);
        }
        if let Some(ann) = oscc {
            self.oscc.insert(id.clone(), ann);
        }
        self.clips.insert(id, clip);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn clip(&self, clip_id: &str) -> Option<&Clip> {
        self.clips.get(clip_id)
    }

    pub fn clips(&self) -> impl Iterator<Item = &Clip> {
        self.clips.values()
    }

    pub fn pnr(&self, clip_id: &str) -> Option<&PnrAnnotation> {
        self.pnr.get(clip_id)
    }

    pub fn oscc(&self, clip_id: &str) -> Option<&OsccAnnotation> {
        self.oscc.get(clip_id)
    }

    /// Every PNR-annotated clip with its annotation, in clip id order.
    pub fn pnr_clips(&self) -> impl Iterator<Item = (&Clip, &PnrAnnotation)> {
        self.pnr.iter().map(|(id, ann)| (&self.clips[id], ann))
    }

    pub fn oscc_annotations(&self) -> impl Iterator<Item = &OsccAnnotation> {
        self.oscc.values()
    }

    pub fn pnr_len(&self) -> usize {
        self.pnr.len()
    }

    pub fn oscc_len(&self) -> usize {
        self.oscc.len()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    clip_id: String,
    fps: f64,
    num_frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_change: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pnr_frame: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    other_pnr_frames: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PnrScoreRecord {
    clip_id: String,
    start: usize,
    end: usize,
    confidence: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OsccScoreRecord {
    clip_id: String,
    prob: f64,
}

/// Deserializes every non-blank line, tagging records with their 1-based line number.
pub(crate) fn read_records<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push((line_no, record));
    }
    Ok(out)
}

/// Writes one record as a single JSON line.
pub fn write_record<T: Serialize>(mut writer: impl Write, record: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut writer, record)?;
    writer.write_all(b"\n")
}

pub fn parse_annotations(reader: impl BufRead) -> Result<Dataset> {
    let mut ds = Dataset::new();
    for (line, rec) in read_records::<AnnotationRecord>(reader)? {
        let clip = Clip::new(rec.clip_id, rec.fps, rec.num_frames).map_err(|e| at_line(line, e))?;
        let pnr = match (rec.pnr_frame, rec.other_pnr_frames) {
            (Some(pos), others) => Some(PnrAnnotation {
                clip_id: clip.clip_id.clone(),
                positive_frame: pos,
                negative_frames: others.unwrap_or_default(),
            }),
            (None, Some(_)) => {
                return Err(at_line(
                    line,
                    Error::validation(&clip.clip_id, "other_pnr_frames given without pnr_frame"),
                ))
            }
            (None, None) => None,
        };
        let oscc = rec.state_change.map(|state_change| OsccAnnotation {
            clip_id: clip.clip_id.clone(),
            state_change,
        });
        ds.insert(clip, pnr, oscc).map_err(|e| at_line(line, e))?;
    }
    Ok(ds)
}

// Appends the source line to errors raised while validating a parsed record.
fn at_line(line: usize, err: Error) -> Error {
    match err {
        Error::Validation { clip_id, message } => Error::Validation {
            clip_id,
            message: format!("{message} (line {line})"),
        },
        Error::Bounds {
            context,
            index,
            len,
        } => Error::Bounds {
            context: format!("{context} (line {line})"),
            index,
            len,
        },
        other => other,
    }
}

pub fn emit_annotations(ds: &Dataset, mut writer: impl Write) -> std::io::Result<()> {
    for clip in ds.clips() {
        let pnr = ds.pnr(&clip.clip_id);
        let rec = AnnotationRecord {
            clip_id: clip.clip_id.clone(),
            fps: clip.fps,
            num_frames: clip.num_frames,
            state_change: ds.oscc(&clip.clip_id).map(|a| a.state_change),
            pnr_frame: pnr.map(|a| a.positive_frame),
            other_pnr_frames: pnr.map(|a| a.negative_frames.clone()),
        };
        write_record(&mut writer, &rec)?;
    }
    Ok(())
}

/// Parses PNR window scores, grouping them into per-clip series sorted by window.
pub fn parse_scores(reader: impl BufRead) -> Result<BTreeMap<String, ScoreSeries>> {
    let mut grouped: BTreeMap<String, Vec<ScoredWindow>> = BTreeMap::new();
    for (line, rec) in read_records::<PnrScoreRecord>(reader)? {
        if rec.start >= rec.end {
            return Err(at_line(
                line,
                Error::validation(
                    &rec.clip_id,
                    format!("window [{}, {}) is empty", rec.start, rec.end),
                ),
            ));
        }
        if !(0.0..=1.0).contains(&rec.confidence) {
            return Err(at_line(
                line,
                Error::validation(
                    &rec.clip_id,
                    format!("confidence {} outside [0, 1]", rec.confidence),
                ),
            ));
        }
        grouped.entry(rec.clip_id).or_default().push(ScoredWindow {
            window: FrameWindow::new(rec.start, rec.end),
            confidence: rec.confidence,
        });
    }
    grouped
        .into_iter()
        .map(|(id, windows)| ScoreSeries::new(id.clone(), windows).map(|s| (id, s)))
        .collect()
}

pub fn emit_scores<'a>(
    series: impl IntoIterator<Item = &'a ScoreSeries>,
    mut writer: impl Write,
) -> std::io::Result<()> {
    let mut all: Vec<&ScoreSeries> = series.into_iter().collect();
    all.sort_by(|a, b| a.clip_id().cmp(b.clip_id()));
    for s in all {
        for sw in s.windows() {
            let rec = PnrScoreRecord {
                clip_id: s.clip_id().to_string(),
                start: sw.window.start,
                end: sw.window.end,
                confidence: sw.confidence,
            };
            write_record(&mut writer, &rec)?;
        }
    }
    Ok(())
}

/// Parses OSCC state-change probabilities, one per clip.
pub fn parse_oscc_scores(reader: impl BufRead) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (line, rec) in read_records::<OsccScoreRecord>(reader)? {
        if !(0.0..=1.0).contains(&rec.prob) {
            return Err(at_line(
                line,
                Error::validation(&rec.clip_id, format!("prob {} outside [0, 1]", rec.prob)),
            ));
        }
        if out.insert(rec.clip_id.clone(), rec.prob).is_some() {
            return Err(at_line(
                line,
                Error::Conflict {
                    clip_id: rec.clip_id,
                },
            ));
        }
    }
    Ok(out)
}

pub fn emit_oscc_scores(
    probs: &BTreeMap<String, f64>,
    mut writer: impl Write,
) -> std::io::Result<()> {
    for (clip_id, &prob) in probs {
        let rec = OsccScoreRecord {
            clip_id: clip_id.clone(),
            prob,
        };
        write_record(&mut writer, &rec)?;
    }
    Ok(())
}

pub fn parse_pnr_predictions(reader: impl BufRead) -> Result<BTreeMap<String, PnrPrediction>> {
    let mut out = BTreeMap::new();
    for (line, rec) in read_records::<PnrPrediction>(reader)? {
        if !(rec.time_sec.is_finite() && rec.time_sec >= 0.0) {
            return Err(at_line(
                line,
                Error::validation(
                    &rec.clip_id,
                    format!("time_sec {} is not a valid time", rec.time_sec),
                ),
            ));
        }
        let id = rec.clip_id.clone();
        if out.insert(id.clone(), rec).is_some() {
            return Err(Error::Conflict { clip_id: id });
        }
    }
    Ok(out)
}

pub fn emit_pnr_predictions<'a>(
    preds: impl IntoIterator<Item = &'a PnrPrediction>,
    mut writer: impl Write,
) -> std::io::Result<()> {
    let mut all: Vec<&PnrPrediction> = preds.into_iter().collect();
    all.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    for p in all {
        write_record(&mut writer, p)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OsccPredictionRecord {
    Label(OsccAnnotation),
    Prob(OsccScoreRecord),
}

/// Parses OSCC predictions given either as labels or as probabilities.
pub fn parse_oscc_predictions(reader: impl BufRead) -> Result<BTreeMap<String, bool>> {
    let mut out = BTreeMap::new();
    for (line, rec) in read_records::<OsccPredictionRecord>(reader)? {
        let (id, label) = match rec {
            OsccPredictionRecord::Label(a) => (a.clip_id, a.state_change),
            OsccPredictionRecord::Prob(r) => {
                if !(0.0..=1.0).contains(&r.prob) {
                    return Err(at_line(
                        line,
                        Error::validation(&r.clip_id, format!("prob {} outside [0, 1]", r.prob)),
                    ));
                }
                (r.clip_id, oscc_label(r.prob))
            }
        };
        if out.insert(id.clone(), label).is_some() {
            return Err(Error::Conflict { clip_id: id });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PnrCountStats {
    pub clips: usize,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

/// PNR frames per annotated clip, counting the positive frame plus every negative.
pub fn pnr_count_stats(ds: &Dataset) -> Result<PnrCountStats> {
    let counts: Vec<usize> = ds.pnr_clips().map(|(_, a)| a.pnr_count()).collect();
    if counts.is_empty() {
        return Err(Error::EmptyInput("no PNR annotations"));
    }
    let total: usize = counts.iter().sum();
    Ok(PnrCountStats {
        clips: counts.len(),
        mean: total as f64 / counts.len() as f64,
        min: *counts.iter().min().unwrap(),
        max: *counts.iter().max().unwrap(),
    })
}

/// Counts of positive and negative PNR positions over equal fraction bins.
///
/// Bin `k` covers `[k/B, (k+1)/B)`; the last bin also includes 1.0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionHistogram {
    pub bins: usize,
    pub positive: Vec<u64>,
    pub negative: Vec<u64>,
}

impl PositionHistogram {
    pub fn empty(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Domain {
                what: "bin count",
                expected: "[1, inf)",
                value: 0.0,
            });
        }
        Ok(Self {
            bins,
            positive: vec![0; bins],
            negative: vec![0; bins],
        })
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.bins as f64
    }

    pub fn peak_positive_bin(&self) -> Option<usize> {
        peak(&self.positive)
    }

    /// Plot-ready columns: bin center, positive count, negative count.
    pub fn write_plot_data(&self, mut writer: impl Write) -> std::io::Result<()> {
        writeln!(writer, "bin_center\tpositive\tnegative")?;
        for k in 0..self.bins {
            writeln!(
                writer,
                "{:.6}\t{}\t{}",
                self.bin_center(k),
                self.positive[k],
                self.negative[k]
            )?;
        }
        Ok(())
    }
}

fn peak(counts: &[u64]) -> Option<usize> {
    let max = *counts.iter().max()?;
    if max == 0 {
        return None;
    }
    counts.iter().position(|&c| c == max)
}

pub fn position_histogram(ds: &Dataset, bins: usize) -> Result<PositionHistogram> {
    let mut hist = PositionHistogram::empty(bins)?;
    for (clip, ann) in ds.pnr_clips() {
        hist.positive[position_bin(ann.positive_frame, clip.num_frames, bins)] += 1;
        for &f in &ann.negative_frames {
            hist.negative[position_bin(f, clip.num_frames, bins)] += 1;
        }
    }
    Ok(hist)
}
