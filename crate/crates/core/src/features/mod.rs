//! Acoustic front end: log-mel filterbank features and their binary storage.

mod file;
mod mel;

pub use file::{read_feature_file, write_feature_file, FeatureFile};
pub use mel::{filter_center_hz, mel_spectra, MelConfig};

use thiserror::Error;

/// A `T×k` sequence of feature frames, row-major, one row per frame, with
/// the analysis timing it was produced at.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    k: usize,
    data: Vec<f64>,
    frame_length_ms: f64,
    frame_shift_ms: f64,
}

impl FeatureSequence {
    /// Builds a sequence from row-major frame data at the default 25 ms / 10
    /// ms timing; requires at least one frame, a positive dimension, and
    /// finite values.
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self, FeatureError> {
        Self::with_timing(k, data, 25.0, 10.0)
    }

    pub fn with_timing(
        k: usize,
        data: Vec<f64>,
        frame_length_ms: f64,
        frame_shift_ms: f64,
    ) -> Result<Self, FeatureError> {
        if k == 0 || data.is_empty() || data.len() % k != 0 {
            return Err(FeatureError::BadShape {
                k,
                values: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { index });
        }
        if !(frame_length_ms > 0.0 && frame_shift_ms > 0.0) {
            return Err(FeatureError::BadConfig(
                "frame timing must be positive".into(),
            ));
        }
        Ok(Self {
            k,
            data,
            frame_length_ms,
            frame_shift_ms,
        })
    }

    pub fn frame_length_ms(&self) -> f64 {
        self.frame_length_ms
    }

    pub fn frame_shift_ms(&self) -> f64 {
        self.frame_shift_ms
    }

    /// Nominal duration in seconds: frames spaced by the shift plus the tail
    /// of the final window.
    pub fn duration_s(&self) -> f64 {
        ((self.num_frames() - 1) as f64 * self.frame_shift_ms + self.frame_length_ms) / 1000.0
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.k..(t + 1) * self.k]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.k)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Errors from feature extraction and feature-file IO.
#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature data of {values} values does not form frames of dimension {k}")]
    BadShape { k: usize, values: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("sample rate {rate} Hz is below the supported minimum of 8000 Hz")]
    SampleRateTooLow { rate: u32 },
    #[error("{samples} samples is shorter than one analysis window of {window}")]
    InputTooShort { samples: usize, window: usize },
    #[error("invalid mel configuration: {0}")]
    BadConfig(String),
    #[error("file does not start with the feature-file magic")]
    BadMagic,
    #[error("unsupported feature-file version {0}")]
    UnsupportedVersion(u32),
    #[error("feature file ends before the declared contents")]
    Truncated,
    #[error("segment id {0:?} not present in feature file")]
    UnknownSegment(String),
    #[error("segment {id:?} has dimension {got}, file stores dimension {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate segment id {0:?}")]
    DuplicateSegment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
