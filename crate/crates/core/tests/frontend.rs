use proptest::prelude::*;
use std::f64::consts::PI;
use vfrtok::frontend::{
    compute_frames, load_audio, load_embeddings, write_embeddings_bin, write_embeddings_csv,
    write_wav_pcm16, FrontendConfig, Waveform,
};
use vfrtok::matrix::{FrameMatrix, FrameRate, Matrix};

fn sine(freq: f64, secs: f64, sr: u32, amp: f64) -> Waveform {
    let n = (secs * f64::from(sr)) as usize;
    Waveform {
        samples: (0..n)
            .map(|i| (amp * (2.0 * PI * freq * i as f64 / f64::from(sr)).sin()) as f32)
            .collect(),
        sample_rate: sr,
    }
}

/// Mel band with the largest response to one frame, computed with a naive DFT
/// and a filterbank built from the HTK formula directly.
fn reference_argmax(frame: &[f64], sr: f64, bands: usize) -> usize {
    let n = frame.len();
    let mag: Vec<f64> = (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in frame.iter().enumerate() {
                let a = -2.0 * PI * (k * i) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect();
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(sr / 2.0);
    let edge = |i: usize| inv(top * i as f64 / (bands + 1) as f64);
    let mut best = (0, f64::NEG_INFINITY);
    for b in 0..bands {
        let (lo, c, hi) = (edge(b), edge(b + 1), edge(b + 2));
        let e: f64 = mag
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let f = k as f64 * sr / n as f64;
                let w = if f > lo && f <= c {
                    (f - lo) / (c - lo)
                } else if f > c && f < hi {
                    (hi - f) / (hi - c)
                } else {
                    0.0
                };
                w * m
            })
            .sum();
        if e > best.1 {
            best = (b, e);
        }
    }
    best.0
}

#[test]
fn sine_peaks_in_the_band_holding_its_frequency() {
    let cfg = FrontendConfig::default();
    let w = sine(1000.0, 1.0, cfg.sample_rate, 0.5);
    let x = compute_frames(&w, &cfg).unwrap();
    let sr = f64::from(cfg.sample_rate);

    // Interior frame 30 spans samples [30·hop − fft/2, 30·hop + fft/2).
    let start = 30 * cfg.hop_size - cfg.fft_size / 2;
    let frame: Vec<f64> = (0..cfg.fft_size)
        .map(|i| {
            let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / cfg.fft_size as f64).cos();
            f64::from(w.samples[start + i]) * hann
        })
        .collect();
    let want = reference_argmax(&frame, sr, cfg.mel_bands);

    let bank = vfrtok::frontend::MelFilterbank::new(cfg.sample_rate, cfg.fft_size, cfg.mel_bands);
    let (lo, _, hi) = bank.band_hz(want);
    assert!(
        lo < 1000.0 && 1000.0 < hi,
        "band {want} spans {lo:.1}..{hi:.1} Hz"
    );

    let edge = cfg.fft_size / cfg.hop_size + 1;
    for t in edge..x.frames() - edge {
        let row = x.frame(t);
        let arg = (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b });
        assert_eq!(arg, want, "frame {t}");
    }
}

#[test]
fn frames_are_deterministic() {
    let cfg = FrontendConfig::default();
    let w = sine(440.0, 0.3, cfg.sample_rate, 0.3);
    assert_eq!(
        compute_frames(&w, &cfg).unwrap(),
        compute_frames(&w, &cfg).unwrap()
    );
}

#[test]
fn frame_count_scales_with_length() {
    let cfg = FrontendConfig::default();
    for secs in [0.1, 0.37, 1.0, 2.5] {
        let a = compute_frames(&sine(300.0, secs, cfg.sample_rate, 0.2), &cfg).unwrap();
        let b = compute_frames(&sine(300.0, 2.0 * secs, cfg.sample_rate, 0.2), &cfg).unwrap();
        assert!((b.frames() as i64 - 2 * a.frames() as i64).abs() <= 1);
        let implied = a.source_duration_sec * a.base_frame_rate.hz();
        assert!((implied - a.frames() as f64).abs() <= 1.0);
    }
}

#[test]
fn wav_round_trip_into_frames() {
    let cfg = FrontendConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let w = sine(700.0, 0.5, cfg.sample_rate, 0.4);
    let p = dir.path().join("a.wav");
    write_wav_pcm16(&p, &w).unwrap();
    let back = load_audio(&p).unwrap();
    assert_eq!(back.samples.len(), w.samples.len());
    assert!(back
        .samples
        .iter()
        .zip(&w.samples)
        .all(|(a, b)| (a - b).abs() < 1e-4));
    let x = compute_frames(&back, &cfg).unwrap();
    assert_eq!(x.frames(), 38);
    assert_eq!(x.base_frame_rate, FrameRate::new(75, 1).unwrap());
}

#[test]
fn binary_and_csv_embeddings_agree() {
    let dir = tempfile::tempdir().unwrap();
    let rate = FrameRate::new(50, 1).unwrap();
    let data: Vec<f32> = (0..7 * 5)
        .map(|i| ((i * 37 % 101) as f32 - 50.0) / 7.3)
        .collect();
    let x = FrameMatrix::frame_aligned(Matrix::new(7, 5, data), rate);
    write_embeddings_bin(dir.path().join("x.vseb"), &x).unwrap();
    write_embeddings_csv(dir.path().join("x.csv"), &x).unwrap();
    let a = load_embeddings(dir.path().join("x.vseb"), Some(5), rate).unwrap();
    let b = load_embeddings(dir.path().join("x.csv"), Some(5), rate).unwrap();
    assert_eq!(a.data, x.data);
    assert_eq!(b.data, x.data);
    assert_eq!(a.base_frame_rate, rate);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn doubling_amplitude_never_lowers_log_mel(
        samples in prop::collection::vec(-0.49f32..0.49, 400..3000),
    ) {
        let cfg = FrontendConfig::default();
        let w = Waveform { samples: samples.clone(), sample_rate: cfg.sample_rate };
        let loud = Waveform { samples: samples.iter().map(|s| 2.0 * s).collect(), sample_rate: cfg.sample_rate };
        let a = compute_frames(&w, &cfg).unwrap();
        let b = compute_frames(&loud, &cfg).unwrap();
        let floor = cfg.log_floor.ln();
        for (x, y) in a.data.as_slice().iter().zip(b.data.as_slice()) {
            prop_assert!(y >= x);
            prop_assert!(*x >= floor && x.is_finite());
        }
    }
}
