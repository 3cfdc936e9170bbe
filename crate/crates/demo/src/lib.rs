//! Browser bindings: segment a synthetic utterance, compute bitrates, and
//! pack or unpack extended token IDs. Each export returns JSON text.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vfrtok::frontend::compute_frames;
use vfrtok::metrics::{baseline_bitrate, bitrate};
use vfrtok::synth::{synth_utterance, SegmentKind, SynthConfig};
use vfrtok::tadpc::{segment_with_scores, ClusterParams, PeakScores};
use vfrtok::{CodingSpace, FrontendConfig};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Truth {
    pub kind: SegmentKind,
    pub start_frame: f64,
}

#[derive(Debug, Serialize)]
pub struct SegmentView {
    pub frames: usize,
    pub bands: usize,
    pub base_frame_rate: f64,
    pub duration_sec: f64,
    /// Log-mel frames, row-major, rounded to 0.01.
    pub mel: Vec<f32>,
    pub score: Vec<f64>,
    pub starts: Vec<usize>,
    pub durations: Vec<usize>,
    pub seeds: Vec<usize>,
    pub truth: Vec<Truth>,
    pub frame_rate_hz: f64,
    pub bitrate_kbps: f64,
    pub baseline_kbps: f64,
}

#[derive(Debug, Serialize)]
pub struct TokenView {
    pub id: u32,
    pub k: u32,
    pub d: u32,
    pub vocab_size: u64,
}

/// Synthesises `seconds` of audio from `seed`, extracts log-mel and segments it.
#[allow(clippy::too_many_arguments)]
pub fn segment_view(
    seed: u64,
    seconds: f64,
    tau: f32,
    beta: f32,
    m: usize,
    s_max: usize,
    codebook_size: u32,
) -> Result<SegmentView, String> {
    if !(seconds > 0.0 && seconds <= 30.0) {
        return Err("seconds must be in (0, 30]".into());
    }
    let fe = FrontendConfig::default();
    let cfg = SynthConfig {
        utterance_sec: seconds,
        sample_rate: fe.sample_rate,
        ..SynthConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, parts) = synth_utterance(&cfg, &mut rng);
    let x = compute_frames(&w, &fe).map_err(|e| e.to_string())?;
    let p = ClusterParams {
        m,
        tau,
        beta,
        s_max,
    };
    p.validate().map_err(|e| e.to_string())?;
    let scores = PeakScores::compute(&x, m).map_err(|e| e.to_string())?;
    let seg = segment_with_scores(&x, &scores, &p).map_err(|e| e.to_string())?;
    let space = CodingSpace::new(codebook_size, s_max as u32).map_err(|e| e.to_string())?;

    let rate = x.base_frame_rate;
    let duration_sec = rate.seconds(x.frames());
    let frame_rate_hz = if x.frames() == 0 {
        0.0
    } else {
        seg.len() as f64 * rate.hz() / x.frames() as f64
    };
    let hop = fe.hop_size as f64;
    Ok(SegmentView {
        frames: x.frames(),
        bands: x.dim(),
        base_frame_rate: rate.hz(),
        duration_sec,
        mel: x
            .data
            .as_slice()
            .iter()
            .map(|v| (v * 100.0).round() / 100.0)
            .collect(),
        score: scores.s,
        starts: seg.clusters.iter().map(|c| c.start).collect(),
        durations: seg.durations(),
        seeds: seg.clusters.iter().map(|c| c.seed).collect(),
        truth: parts
            .iter()
            .map(|s| Truth {
                kind: s.kind,
                start_frame: s.start_sample as f64 / hop,
            })
            .collect(),
        frame_rate_hz,
        bitrate_kbps: bitrate(frame_rate_hz, &space),
        baseline_kbps: baseline_bitrate(rate.hz(), u64::from(codebook_size)),
    })
}

pub fn token_view(space: &CodingSpace, id: i64) -> Result<TokenView, String> {
    let t = space.token(id).map_err(|e| e.to_string())?;
    let (k, d) = space.decode(t).map_err(|e| e.to_string())?;
    Ok(TokenView {
        id: t.id(),
        k,
        d,
        vocab_size: space.vocab_size(),
    })
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

fn space(codebook_size: u32, s_max: u32) -> Result<CodingSpace, String> {
    CodingSpace::new(codebook_size, s_max).map_err(|e| e.to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn segment(
    seed: u32,
    seconds: f64,
    tau: f32,
    beta: f32,
    m: u32,
    s_max: u32,
    codebook_size: u32,
) -> Result<String, JsError> {
    json(segment_view(
        u64::from(seed),
        seconds,
        tau,
        beta,
        m as usize,
        s_max as usize,
        codebook_size,
    ))
}

#[wasm_bindgen(js_name = bitrateKbps)]
pub fn bitrate_kbps(frame_rate_hz: f64, codebook_size: u32, s_max: u32) -> Result<f64, JsError> {
    let s = space(codebook_size, s_max).map_err(|e| JsError::new(&e))?;
    Ok(bitrate(frame_rate_hz, &s))
}

#[wasm_bindgen(js_name = encodeToken)]
pub fn encode_token(k: u32, d: u32, codebook_size: u32, s_max: u32) -> Result<String, JsError> {
    json(space(codebook_size, s_max).and_then(|s| {
        let t = s.encode(k, d).map_err(|e| e.to_string())?;
        token_view(&s, i64::from(t.id()))
    }))
}

#[wasm_bindgen(js_name = decodeToken)]
pub fn decode_token(id: f64, codebook_size: u32, s_max: u32) -> Result<String, JsError> {
    if id.fract() != 0.0 || !id.is_finite() {
        return Err(JsError::new("token ID must be an integer"));
    }
    json(space(codebook_size, s_max).and_then(|s| token_view(&s, id as i64)))
}
