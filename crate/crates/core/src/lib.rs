//! Variable-frame-rate speech tokenization.
//!
//! The pipeline turns a frame-level feature sequence into a compact stream
//! of tokens whose IDs carry both content and duration:
//!
//! 1. [`frontend`] produces a [`FrameMatrix`] (log-mel from WAV, or external
//!    embeddings).
//! 2. [`tadpc`] groups temporally contiguous, similar frames into clusters of
//!    at most `s_max` frames and mean-pools each one.
//! 3. [`vq`] maps every pooled embedding to its nearest code in a single
//!    codebook of `K` entries.
//! 4. [`durcode`] packs `(code, duration)` into one ID in `[0, K·s_max)`.
//! 5. [`stream`] ties these together, serialises the result, and expands a
//!    stream back to frame rate.
//!
//! [`metrics`] reports token rate and bitrate; [`lm`] fits an n-gram model
//! over the extended IDs.

pub mod durcode;
pub mod frontend;
pub mod lm;
pub mod matrix;
pub mod metrics;
pub mod stream;
pub mod synth;
pub mod tadpc;
pub mod vq;

mod binio;

pub use durcode::{CodeError, CodingSpace, ExtendedToken};
pub use frontend::{FrontendConfig, FrontendError, Waveform};
pub use lm::{LmError, NGramModel};
pub use matrix::{FrameMatrix, FrameRate, Matrix};
pub use metrics::{MetricsError, RateReport};
pub use stream::{StreamError, TokenStream};
pub use tadpc::{ClusterError, ClusterParams, Segmentation};
pub use vq::{Codebook, TrainConfig, TrainReport, VqError};

use thiserror::Error;

/// Any pipeline failure, tagged by the stage that produced it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frontend: {0}")]
    Frontend(#[from] FrontendError),
    #[error("clustering: {0}")]
    Cluster(#[from] ClusterError),
    #[error("quantizer: {0}")]
    Vq(#[from] VqError),
    #[error("duration coding: {0}")]
    Code(#[from] CodeError),
    #[error("stream: {0}")]
    Stream(#[from] StreamError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("language model: {0}")]
    Lm(#[from] LmError),
}

impl Error {
    /// Stage name of the failing module.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Frontend(_) => "frontend",
            Error::Cluster(_) => "tadpc",
            Error::Vq(_) => "vq",
            Error::Code(_) => "durcode",
            Error::Stream(_) => "stream",
            Error::Metrics(_) => "metrics",
            Error::Lm(_) => "lm",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
