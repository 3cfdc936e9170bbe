//! Token rate, bitrate and distortion accounting.
//!
//! The bitrate of a variable-rate stream is its average token rate times the
//! bits needed to index the extended vocabulary, `log2(K·s_max)`; for a
//! fixed-rate baseline the vocabulary is just `K`. Corpus rates pool tokens
//! and seconds over all utterances rather than averaging per-utterance rates.

use crate::durcode::{CodeError, CodingSpace};
use crate::matrix::{FrameMatrix, FrameRate};
use crate::stream::TokenStream;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus has zero total duration")]
    ZeroDuration,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("streams use different coding spaces")]
    MixedSpaces,
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Pooled tokens per second over a corpus.
pub fn frame_rate(streams: &[TokenStream]) -> Result<f64, MetricsError> {
    if streams.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut clock = FrameClock::default();
    let mut tokens = 0u64;
    for s in streams {
        clock.add(s);
        tokens += s.len() as u64;
    }
    clock.rate(tokens)
}

/// Duration bookkeeping. While every stream shares one base rate the rate is
/// computed from integer frame counts, so a stream with one token per frame
/// reports the base rate exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct FrameClock {
    seconds: f64,
    frames: u64,
    base: Option<FrameRate>,
    mixed: bool,
}

impl FrameClock {
    fn add(&mut self, s: &TokenStream) {
        self.seconds += s.source_duration_sec;
        self.frames += s.expected_frames();
        match self.base {
            None => self.base = Some(s.base_frame_rate),
            Some(b) if b != s.base_frame_rate => self.mixed = true,
            Some(_) => {}
        }
    }

    fn merge(&mut self, o: &FrameClock) {
        self.seconds += o.seconds;
        self.frames += o.frames;
        match (self.base, o.base) {
            (None, b) => self.base = b,
            (Some(a), Some(b)) if a != b => self.mixed = true,
            _ => {}
        }
        self.mixed |= o.mixed;
    }

    fn rate(&self, tokens: u64) -> Result<f64, MetricsError> {
        if self.seconds <= 0.0 {
            return Err(MetricsError::ZeroDuration);
        }
        match self.base {
            Some(b) if !self.mixed && self.frames > 0 => {
                Ok(tokens as f64 * f64::from(b.num) / (self.frames as f64 * f64::from(b.den)))
            }
            _ => Ok(tokens as f64 / self.seconds),
        }
    }
}

/// `frame_rate × log2(K·s_max)`, in kbps.
pub fn bitrate(frame_rate_hz: f64, space: &CodingSpace) -> f64 {
    frame_rate_hz * (space.vocab_size() as f64).log2() / 1000.0
}

/// `frame_rate × log2(K)`, in kbps.
pub fn baseline_bitrate(frame_rate_hz: f64, codebook_size: u64) -> f64 {
    frame_rate_hz * (codebook_size as f64).log2() / 1000.0
}

/// Mean squared error over all entries and mean per-frame cosine.
/// Zero rows count as cosine 0.
pub fn embedding_distortion(
    x: &FrameMatrix,
    xhat: &FrameMatrix,
) -> Result<(f64, f64), MetricsError> {
    let a = (x.frames(), x.dim());
    let b = (xhat.frames(), xhat.dim());
    if a != b {
        return Err(MetricsError::ShapeMismatch(a, b));
    }
    if a.0 == 0 || a.1 == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    let (sq, cos) = distortion_sums(x, xhat);
    Ok((sq / (a.0 * a.1) as f64, cos / a.0 as f64))
}

fn distortion_sums(x: &FrameMatrix, xhat: &FrameMatrix) -> (f64, f64) {
    let mut sq = 0.0;
    let mut cos_sum = 0.0;
    for (r, rh) in x.data.iter_rows().zip(xhat.data.iter_rows()) {
        let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
        for (&u, &v) in r.iter().zip(rh) {
            let (u, v) = (f64::from(u), f64::from(v));
            sq += (u - v) * (u - v);
            dot += u * v;
            na += u * u;
            nb += v * v;
        }
        if na > 0.0 && nb > 0.0 {
            cos_sum += dot / (na.sqrt() * nb.sqrt());
        }
    }
    (sq, cos_sum)
}

/// Token counts per duration `d = 1..=s_max` (index `d − 1`).
pub fn duration_histogram(streams: &[TokenStream], s_max: usize) -> Result<Vec<u64>, MetricsError> {
    let mut hist = vec![0u64; s_max];
    for s in streams {
        for (_, d) in s.decoded()? {
            let d = d as usize;
            if d > hist.len() {
                hist.resize(d, 0);
            }
            hist[d - 1] += 1;
        }
    }
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRate {
    pub name: String,
    pub tokens: usize,
    pub seconds: f64,
    pub frame_rate_hz: f64,
}

/// Mergeable partial sums for a [`RateReport`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateAccumulator {
    space: Option<CodingSpace>,
    tokens: u64,
    clock: FrameClock,
    histogram: Vec<u64>,
    sq_err: f64,
    entries: u64,
    cos_sum: f64,
    frames: u64,
    utterances: Vec<UtteranceRate>,
}

impl RateAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_stream(
        &mut self,
        name: impl Into<String>,
        s: &TokenStream,
    ) -> Result<(), MetricsError> {
        match self.space {
            None => self.space = Some(s.space),
            Some(sp) if sp != s.space => return Err(MetricsError::MixedSpaces),
            Some(_) => {}
        }
        let hist = duration_histogram(std::slice::from_ref(s), s.space.s_max() as usize)?;
        merge_hist(&mut self.histogram, &hist);
        self.tokens += s.len() as u64;
        self.clock.add(s);
        self.utterances.push(UtteranceRate {
            name: name.into(),
            tokens: s.len(),
            seconds: s.source_duration_sec,
            frame_rate_hz: frame_rate(std::slice::from_ref(s)).unwrap_or(0.0),
        });
        Ok(())
    }

    pub fn add_distortion(
        &mut self,
        x: &FrameMatrix,
        xhat: &FrameMatrix,
    ) -> Result<(), MetricsError> {
        let a = (x.frames(), x.dim());
        let b = (xhat.frames(), xhat.dim());
        if a != b {
            return Err(MetricsError::ShapeMismatch(a, b));
        }
        let (sq, cos) = distortion_sums(x, xhat);
        self.sq_err += sq;
        self.cos_sum += cos;
        self.entries += (a.0 * a.1) as u64;
        self.frames += a.0 as u64;
        Ok(())
    }

    pub fn merge(&mut self, other: RateAccumulator) -> Result<(), MetricsError> {
        match (self.space, other.space) {
            (Some(a), Some(b)) if a != b => return Err(MetricsError::MixedSpaces),
            (None, b) => self.space = b,
            _ => {}
        }
        self.tokens += other.tokens;
        self.clock.merge(&other.clock);
        merge_hist(&mut self.histogram, &other.histogram);
        self.sq_err += other.sq_err;
        self.entries += other.entries;
        self.cos_sum += other.cos_sum;
        self.frames += other.frames;
        self.utterances.extend(other.utterances);
        Ok(())
    }

    pub fn finish(self) -> Result<RateReport, MetricsError> {
        let space = self.space.ok_or(MetricsError::EmptyCorpus)?;
        let rate = self.clock.rate(self.tokens)?;
        Ok(RateReport {
            utterances: self.utterances.len(),
            total_tokens: self.tokens,
            total_seconds: self.clock.seconds,
            frame_rate_hz: rate,
            codebook_size: space.codebook_size(),
            s_max: space.s_max(),
            bitrate_kbps: bitrate(rate, &space),
            duration_histogram: self.histogram,
            mean_distortion: (self.entries > 0).then(|| self.sq_err / self.entries as f64),
            mean_cosine: (self.frames > 0).then(|| self.cos_sum / self.frames as f64),
            per_utterance: self.utterances,
        })
    }
}

fn merge_hist(into: &mut Vec<u64>, from: &[u64]) {
    if into.len() < from.len() {
        into.resize(from.len(), 0);
    }
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub utterances: usize,
    pub total_tokens: u64,
    pub total_seconds: f64,
    pub frame_rate_hz: f64,
    pub codebook_size: u32,
    pub s_max: u32,
    pub bitrate_kbps: f64,
    pub duration_histogram: Vec<u64>,
    pub mean_distortion: Option<f64>,
    pub mean_cosine: Option<f64>,
    pub per_utterance: Vec<UtteranceRate>,
}

impl RateReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k:<18} {v:>12}");
        };
        row("utterances", self.utterances.to_string());
        row("tokens", self.total_tokens.to_string());
        row("seconds", format!("{:.3}", self.total_seconds));
        row("frame rate (Hz)", format!("{:.2}", self.frame_rate_hz));
        row("K", self.codebook_size.to_string());
        row("s_max", self.s_max.to_string());
        row("bitrate (kbps)", format!("{:.2}", self.bitrate_kbps));
        if let Some(d) = self.mean_distortion {
            row("mse", format!("{d:.6}"));
        }
        if let Some(c) = self.mean_cosine {
            row("mean cosine", format!("{c:.6}"));
        }
        for (i, c) in self.duration_histogram.iter().enumerate() {
            row(&format!("d={}", i + 1), c.to_string());
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("duration,count\n");
        for (i, c) in self.duration_histogram.iter().enumerate() {
            let _ = writeln!(out, "{},{c}", i + 1);
        }
        out
    }

    pub fn utterance_csv(&self) -> String {
        let mut out = String::from("name,tokens,seconds,frame_rate_hz\n");
        for u in &self.per_utterance {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                u.name, u.tokens, u.seconds, u.frame_rate_hz
            );
        }
        out
    }
}
