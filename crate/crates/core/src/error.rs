use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{context}: frame {index} out of bounds for clip of {len} frames")]
    Bounds {
        context: String,
        index: usize,
        len: usize,
    },

    #[error("{what} must lie in {expected}, got {value}")]
    Domain {
        what: &'static str,
        expected: &'static str,
        value: f64,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("clip {clip_id}: {message}")]
    Validation { clip_id: String, message: String },

    #[error("duplicate record for clip {clip_id}")]
    Conflict { clip_id: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("clip {clip_id} has {num_frames} frames, shorter than window length {window}")]
    ClipTooShort {
        clip_id: String,
        num_frames: usize,
        window: usize,
    },

    #[error("clip {clip_id}: no window of length {window} avoids every PNR frame")]
    NegativeSpaceEmpty { clip_id: String, window: usize },

    #[error("missing predictions for {} annotated clip(s): {}", .missing.len(), .missing.join(", "))]
    Coverage { missing: Vec<String> },

    #[error("prediction for unknown clip {clip_id}")]
    UnknownClip { clip_id: String },
}

impl Error {
    pub(crate) fn validation(clip_id: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            clip_id: clip_id.to_string(),
            message: message.into(),
        }
    }
}
