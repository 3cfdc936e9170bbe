//! Seeded synthetic corpus: utterances stitched from silence, steady tones,
//! linear chirps, harmonic buzzes and white-noise segments.

use crate::frontend::Waveform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sample_rate: u32,
    pub utterances: usize,
    pub utterance_sec: f64,
    /// Segment lengths are drawn uniformly from this range, in seconds.
    pub min_segment_sec: f64,
    pub max_segment_sec: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: 24_000,
            utterances: 16,
            utterance_sec: 4.0,
            min_segment_sec: 0.05,
            max_segment_sec: 0.6,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Silence,
    Tone,
    Chirp,
    Buzz,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSegment {
    pub kind: SegmentKind,
    pub start_sample: usize,
    pub len: usize,
}

/// Raised-cosine fade length in samples at segment edges.
const FADE: usize = 48;

pub fn synth_utterance(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Waveform, Vec<SynthSegment>) {
    let sr = f64::from(cfg.sample_rate);
    let total = (cfg.utterance_sec * sr).round() as usize;
    let noise = Normal::new(0.0f64, 1.0).expect("unit normal");
    let mut samples = Vec::with_capacity(total);
    let mut segments = Vec::new();
    while samples.len() < total {
        let secs = rng.random_range(cfg.min_segment_sec..=cfg.max_segment_sec);
        let len = ((secs * sr).round() as usize).clamp(1, total - samples.len());
        let kind = match rng.random_range(0..5) {
            0 => SegmentKind::Silence,
            1 => SegmentKind::Tone,
            2 => SegmentKind::Chirp,
            3 => SegmentKind::Buzz,
            _ => SegmentKind::Noise,
        };
        let amp = rng.random_range(0.05..0.6);
        let start = samples.len();
        let f0 = rng.random_range(80.0..4000.0);
        let f1 = rng.random_range(80.0..4000.0);
        let harmonics = rng.random_range(3..12);
        let mut phase = 0.0f64;
        for n in 0..len {
            let t = n as f64 / sr;
            let raw = match kind {
                SegmentKind::Silence => 1e-4 * noise.sample(rng),
                SegmentKind::Tone => (TAU * f0 * t).sin(),
                SegmentKind::Chirp => {
                    let f = f0 + (f1 - f0) * n as f64 / len as f64;
                    phase += TAU * f / sr;
                    phase.sin()
                }
                SegmentKind::Buzz => {
                    let base = f0.min(400.0);
                    (1..=harmonics)
                        .map(|h| (TAU * base * h as f64 * t).sin() / h as f64)
                        .sum::<f64>()
                        * 0.5
                }
                SegmentKind::Noise => 0.5 * noise.sample(rng),
            };
            let fade_in = (n as f64 / FADE as f64).min(1.0);
            let fade_out = ((len - n) as f64 / FADE as f64).min(1.0);
            let scale = if kind == SegmentKind::Silence {
                1.0
            } else {
                amp * fade_in * fade_out
            };
            samples.push((raw * scale).clamp(-1.0, 1.0) as f32);
        }
        segments.push(SynthSegment {
            kind,
            start_sample: start,
            len,
        });
    }
    (
        Waveform {
            samples,
            sample_rate: cfg.sample_rate,
        },
        segments,
    )
}

/// Deterministic corpus for a given config.
pub fn synth_corpus(cfg: &SynthConfig) -> Vec<Waveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.utterances)
        .map(|_| synth_utterance(cfg, &mut rng).0)
        .collect()
}
