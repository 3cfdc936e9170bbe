//! End-to-end tokenization and the `VSTK` token-stream file format.
//!
//! Layout (little-endian, 78-byte header):
//!
//! | field               | type      |
//! |---------------------|-----------|
//! | magic               | `b"VSTK"` |
//! | version             | u16 = 1   |
//! | K                   | u32       |
//! | s_max               | u16       |
//! | base rate num / den | u32, u32  |
//! | source duration (s) | f64       |
//! | m                   | u16       |
//! | tau                 | f32       |
//! | beta                | f32       |
//! | codebook hash       | 32 bytes  |
//! | N                   | u64       |
//! | tokens              | N × u32   |

use crate::binio::{put_f32, put_f64, put_u16, put_u32, put_u64, ByteReader};
use crate::durcode::{CodeError, CodingSpace, ExtendedToken};
use crate::matrix::{FrameMatrix, FrameRate, Matrix};
use crate::tadpc::{pool, segment, ClusterError, ClusterParams, Segmentation};
use crate::vq::{quantize_batch, Codebook, VqError};
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const STREAM_MAGIC: &[u8; 4] = b"VSTK";
pub const STREAM_VERSION: u16 = 1;
pub const STREAM_HEADER_LEN: usize = 78;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Vq(#[from] VqError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("frame dimension {frames} does not match codebook dimension {codebook}")]
    DimensionMismatch { frames: usize, codebook: usize },
    #[error("stream was produced with a different codebook")]
    HashMismatch,
    #[error("stream has K = {stream}, codebook has {codebook} entries")]
    CodebookSize { stream: u32, codebook: usize },
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic in stream file")]
    BadMagic,
    #[error("unsupported stream version {0}")]
    Version(u16),
    #[error("stream file is truncated or has trailing bytes")]
    CorruptLength,
    #[error("invalid stream header: {0}")]
    InvalidHeader(&'static str),
    #[error("durations sum to {sum} frames but the header implies {expected}")]
    DurationMismatch { sum: u64, expected: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    pub tokens: Vec<ExtendedToken>,
    pub space: CodingSpace,
    pub base_frame_rate: FrameRate,
    pub codebook_hash: [u8; 32],
    /// Frame-aligned: `T / base_frame_rate`.
    pub source_duration_sec: f64,
    pub params: ClusterParams,
}

impl TokenStream {
    /// Decoded `(k, d)` pairs in temporal order.
    pub fn decoded(&self) -> Result<Vec<(u32, u32)>, CodeError> {
        self.tokens.iter().map(|&t| self.space.decode(t)).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of base-rate frames the stream expands to.
    pub fn total_frames(&self) -> Result<u64, CodeError> {
        Ok(self.decoded()?.iter().map(|&(_, d)| u64::from(d)).sum())
    }

    /// `round(source_duration_sec × base_frame_rate)`.
    pub fn expected_frames(&self) -> u64 {
        (self.source_duration_sec * self.base_frame_rate.hz()).round() as u64
    }

    /// Checks token ranges and duration conservation.
    pub fn validate(&self) -> Result<(), StreamError> {
        if self.params.s_max != self.space.s_max() as usize {
            return Err(StreamError::InvalidHeader(
                "params.s_max differs from coding space",
            ));
        }
        let sum = self.total_frames()?;
        let expected = self.expected_frames();
        if sum != expected {
            return Err(StreamError::DurationMismatch { sum, expected });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, StreamError> {
        self.validate()?;
        let s_max = u16::try_from(self.space.s_max())
            .map_err(|_| StreamError::InvalidHeader("s_max exceeds u16"))?;
        let m = u16::try_from(self.params.m)
            .map_err(|_| StreamError::InvalidHeader("m exceeds u16"))?;
        let mut out = Vec::with_capacity(STREAM_HEADER_LEN + 4 * self.tokens.len());
        out.extend_from_slice(STREAM_MAGIC);
        put_u16(&mut out, STREAM_VERSION);
        put_u32(&mut out, self.space.codebook_size());
        put_u16(&mut out, s_max);
        put_u32(&mut out, self.base_frame_rate.num);
        put_u32(&mut out, self.base_frame_rate.den);
        put_f64(&mut out, self.source_duration_sec);
        put_u16(&mut out, m);
        put_f32(&mut out, self.params.tau);
        put_f32(&mut out, self.params.beta);
        out.extend_from_slice(&self.codebook_hash);
        put_u64(&mut out, self.tokens.len() as u64);
        for t in &self.tokens {
            put_u32(&mut out, t.id());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StreamError> {
        let mut r = ByteReader::new(bytes);
        let corrupt = |_| StreamError::CorruptLength;
        if r.take(4).map_err(corrupt)? != STREAM_MAGIC {
            return Err(StreamError::BadMagic);
        }
        let version = r.u16().map_err(corrupt)?;
        if version != STREAM_VERSION {
            return Err(StreamError::Version(version));
        }
        let k = r.u32().map_err(corrupt)?;
        let s_max = r.u16().map_err(corrupt)?;
        let num = r.u32().map_err(corrupt)?;
        let den = r.u32().map_err(corrupt)?;
        let source_duration_sec = r.f64().map_err(corrupt)?;
        let m = r.u16().map_err(corrupt)?;
        let tau = r.f32().map_err(corrupt)?;
        let beta = r.f32().map_err(corrupt)?;
        let codebook_hash = r.hash().map_err(corrupt)?;
        let n = r.u64().map_err(corrupt)?;
        let body = usize::try_from(n)
            .ok()
            .and_then(|n| n.checked_mul(4))
            .ok_or(StreamError::CorruptLength)?;
        if r.remaining() != body {
            return Err(StreamError::CorruptLength);
        }
        let space = CodingSpace::new(k, u32::from(s_max))?;
        let base_frame_rate = FrameRate { num, den };
        if num == 0 || den == 0 {
            return Err(StreamError::InvalidHeader("zero frame rate"));
        }
        if !(source_duration_sec.is_finite() && source_duration_sec >= 0.0) {
            return Err(StreamError::InvalidHeader("bad source duration"));
        }
        let tokens = (0..n)
            .map(|_| {
                let id = r.u32().map_err(corrupt)?;
                Ok(space.token(i64::from(id))?)
            })
            .collect::<Result<Vec<_>, StreamError>>()?;
        let ts = Self {
            tokens,
            space,
            base_frame_rate,
            codebook_hash,
            source_duration_sec,
            params: ClusterParams {
                m: usize::from(m),
                tau,
                beta,
                s_max: usize::from(s_max),
            },
        };
        ts.validate()?;
        Ok(ts)
    }

    /// Mirror of every header field plus decoded tokens, for debugging.
    pub fn to_json(&self) -> Result<serde_json::Value, StreamError> {
        #[derive(Serialize)]
        struct Tok {
            id: u32,
            k: u32,
            d: u32,
        }
        let tokens: Vec<Tok> = self
            .tokens
            .iter()
            .map(|&t| {
                let (k, d) = self.space.decode(t)?;
                Ok(Tok { id: t.id(), k, d })
            })
            .collect::<Result<_, CodeError>>()?;
        Ok(serde_json::json!({
            "version": STREAM_VERSION,
            "codebook_size": self.space.codebook_size(),
            "s_max": self.space.s_max(),
            "base_frame_rate": { "num": self.base_frame_rate.num, "den": self.base_frame_rate.den },
            "source_duration_sec": self.source_duration_sec,
            "params": self.params,
            "codebook_hash": hex(&self.codebook_hash),
            "tokens": tokens,
        }))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_stream(ts: &TokenStream, path: impl AsRef<Path>) -> Result<(), StreamError> {
    let path = path.as_ref();
    std::fs::write(path, ts.to_bytes()?).map_err(|source| StreamError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_stream(path: impl AsRef<Path>) -> Result<TokenStream, StreamError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| StreamError::Io {
        path: path.to_owned(),
        source,
    })?;
    TokenStream::from_bytes(&bytes)
}

/// Reads a stream and verifies it was produced with `cb`.
pub fn read_stream_for(path: impl AsRef<Path>, cb: &Codebook) -> Result<TokenStream, StreamError> {
    let ts = read_stream(path)?;
    check_codebook(&ts, cb)?;
    Ok(ts)
}

fn check_codebook(ts: &TokenStream, cb: &Codebook) -> Result<(), StreamError> {
    if ts.codebook_hash != cb.content_hash() {
        return Err(StreamError::HashMismatch);
    }
    if ts.space.codebook_size() as usize != cb.len() {
        return Err(StreamError::CodebookSize {
            stream: ts.space.codebook_size(),
            codebook: cb.len(),
        });
    }
    Ok(())
}

/// Everything produced on the way to a token stream.
#[derive(Debug, Clone)]
pub struct Tokenized {
    pub stream: TokenStream,
    pub segmentation: Segmentation,
    pub pooled: Matrix,
    pub indices: Vec<u32>,
}

/// Segment, pool, quantize and duration-code `x`.
pub fn tokenize(
    x: &FrameMatrix,
    cb: &Codebook,
    p: &ClusterParams,
) -> Result<TokenStream, StreamError> {
    tokenize_detailed(x, cb, p).map(|t| t.stream)
}

pub fn tokenize_detailed(
    x: &FrameMatrix,
    cb: &Codebook,
    p: &ClusterParams,
) -> Result<Tokenized, StreamError> {
    p.validate()?;
    if x.dim() != cb.dim() {
        return Err(StreamError::DimensionMismatch {
            frames: x.dim(),
            codebook: cb.dim(),
        });
    }
    let k =
        u32::try_from(cb.len()).map_err(|_| StreamError::InvalidHeader("codebook too large"))?;
    let s_max =
        u32::try_from(p.s_max).map_err(|_| StreamError::InvalidHeader("s_max too large"))?;
    let space = CodingSpace::new(k, s_max)?;
    let segmentation = segment(x, p)?;
    let (pooled, durations) = pool(x, &segmentation)?;
    let (indices, _) = quantize_batch(&pooled, cb)?;
    let tokens = indices
        .iter()
        .zip(&durations)
        .map(|(&k, &d)| space.encode(k, d as u32))
        .collect::<Result<Vec<_>, _>>()?;
    let stream = TokenStream {
        tokens,
        space,
        base_frame_rate: x.base_frame_rate,
        codebook_hash: cb.content_hash(),
        source_duration_sec: x.base_frame_rate.seconds(x.frames()),
        params: *p,
    };
    Ok(Tokenized {
        stream,
        segmentation,
        pooled,
        indices,
    })
}

/// Repeats each decoded code vector `d` times, restoring the frame rate.
pub fn expand(ts: &TokenStream, cb: &Codebook) -> Result<FrameMatrix, StreamError> {
    check_codebook(ts, cb)?;
    let mut data = Matrix::zeros(0, cb.dim());
    for (k, d) in ts.decoded()? {
        let row = cb.vector(k as usize);
        for _ in 0..d {
            data.push_row(row);
        }
    }
    Ok(FrameMatrix {
        data,
        base_frame_rate: ts.base_frame_rate,
        source_duration_sec: ts.source_duration_sec,
    })
}
