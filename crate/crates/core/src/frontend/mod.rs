//! Audio and embedding ingestion.
//!
//! Produces a [`FrameMatrix`] from either a PCM WAV file (via a log-mel
//! analysis) or an externally computed embedding file. The default analysis
//! uses a 320-sample hop at 24 kHz, which gives the 75 Hz base frame rate the
//! clustering stage is tuned for.

mod embeddings;
mod mel;
mod wav;

pub use embeddings::{
    load_embeddings, read_embeddings, write_embeddings_bin, write_embeddings_csv,
};
pub use mel::{compute_frames, hz_to_mel, mel_to_hz, MelFilterbank};
pub use wav::{load_audio, write_wav_pcm16};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable WAV file: {0}")]
    Wav(String),
    #[error("unsupported sample encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("zero-length audio")]
    ZeroLength,
    #[error("invalid frontend config: {0}")]
    InvalidConfig(&'static str),
    #[error("sample rate {actual} Hz does not match configured {expected} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("row {row} has {found} values, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("embedding file is empty")]
    Empty,
    #[error("bad magic in embedding file")]
    BadMagic,
    #[error("unsupported embedding file version {0}")]
    Version(u16),
    #[error("embedding file is truncated or has trailing bytes")]
    CorruptLength,
}

/// Mono PCM audio scaled to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f32> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * i as f64 / nf;
                let w = match self {
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Rectangular => 1.0,
                };
                w as f32
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop_size: usize,
    pub mel_bands: usize,
    pub log_floor: f32,
    pub window: Window,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: 24_000,
            fft_size: 1024,
            hop_size: 320,
            mel_bands: 80,
            log_floor: 1e-5,
            window: Window::Hann,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<(), FrontendError> {
        if self.sample_rate == 0 {
            return Err(FrontendError::InvalidConfig("sample_rate must be positive"));
        }
        if self.hop_size == 0 {
            return Err(FrontendError::InvalidConfig("hop_size must be positive"));
        }
        if self.fft_size < self.hop_size {
            return Err(FrontendError::InvalidConfig(
                "fft_size must be at least hop_size",
            ));
        }
        if self.mel_bands == 0 {
            return Err(FrontendError::InvalidConfig("mel_bands must be at least 1"));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(FrontendError::InvalidConfig("log_floor must be positive"));
        }
        if self.mel_bands > self.fft_size / 2 + 1 {
            return Err(FrontendError::InvalidConfig("more mel bands than FFT bins"));
        }
        Ok(())
    }
}
