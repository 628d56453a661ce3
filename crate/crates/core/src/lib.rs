//! Sampling, point-of-no-return (PNR) localization, score fusion and
//! evaluation for object state-change video tasks.
//!
//! Neural scorers stay outside this crate: they hand over per-window
//! confidences (PNR) or per-clip probabilities (OSCC) through the line-oriented
//! formats in [`ingest`], or are replaced by the simulator in [`sim`].

pub mod error;
pub mod eval;
pub mod fusion;
pub mod ingest;
pub mod localization;
pub mod model;
pub mod sampling;
pub mod sim;

pub use error::{Error, Result};
pub use ingest::Dataset;
pub use localization::{PnrPrediction, SelectionConfig};
pub use model::{
    Clip, Fraction, FrameWindow, OsccAnnotation, PnrAnnotation, ScoreSeries, ScoredWindow,
};
