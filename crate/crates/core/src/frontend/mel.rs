use super::{FrontendConfig, FrontendError, Waveform};
use crate::matrix::{FrameMatrix, FrameRate, Matrix};
use rustfft::{num_complex::Complex, FftPlanner};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with unit peak, evenly spaced on the mel scale between
/// 0 Hz and Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `bands × bins` weights, row-major.
    weights: Vec<f32>,
    bins: usize,
    edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(sample_rate: u32, fft_size: usize, bands: usize) -> Self {
        let bins = fft_size / 2 + 1;
        let nyquist = f64::from(sample_rate) / 2.0;
        let top = hz_to_mel(nyquist);
        let edges_hz: Vec<f64> = (0..bands + 2)
            .map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64))
            .collect();
        let bin_hz = f64::from(sample_rate) / fft_size as f64;
        let mut weights = vec![0.0f32; bands * bins];
        for b in 0..bands {
            let (lo, mid, hi) = (edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]);
            for k in 0..bins {
                let f = k as f64 * bin_hz;
                let w = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                weights[b * bins + k] = w as f32;
            }
        }
        Self {
            weights,
            bins,
            edges_hz,
        }
    }

    pub fn bands(&self) -> usize {
        self.edges_hz.len() - 2
    }

    /// `(lower, center, upper)` frequencies of band `b` in Hz.
    pub fn band_hz(&self, b: usize) -> (f64, f64, f64) {
        (self.edges_hz[b], self.edges_hz[b + 1], self.edges_hz[b + 2])
    }

    fn apply(&self, spectrum: &[f32], out: &mut [f32]) {
        for (b, o) in out.iter_mut().enumerate() {
            let w = &self.weights[b * self.bins..(b + 1) * self.bins];
            *o = w.iter().zip(spectrum).map(|(w, s)| w * s).sum();
        }
    }
}

/// Index into a signal of length `len` after symmetric (edge-excluded)
/// reflection, so that `-1 -> 1` and `len -> len - 2`.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Log-mel magnitude analysis with reflect-centered frames: frame `t` is
/// centred on sample `t * hop`, giving `ceil(len / hop)` frames.
pub fn compute_frames(w: &Waveform, cfg: &FrontendConfig) -> Result<FrameMatrix, FrontendError> {
    cfg.validate()?;
    if w.samples.is_empty() {
        return Err(FrontendError::ZeroLength);
    }
    if w.sample_rate != cfg.sample_rate {
        return Err(FrontendError::SampleRateMismatch {
            expected: cfg.sample_rate,
            actual: w.sample_rate,
        });
    }
    let len = w.samples.len();
    let n_fft = cfg.fft_size;
    let pad = (n_fft / 2) as isize;
    let frames = len.div_ceil(cfg.hop_size);
    let window = cfg.window.coefficients(n_fft);
    let bank = MelFilterbank::new(cfg.sample_rate, n_fft, cfg.mel_bands);
    let fft = FftPlanner::<f32>::new().plan_fft_forward(n_fft);
    let floor_ln = cfg.log_floor.ln();

    let mut buf = vec![Complex::new(0.0f32, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0f32, 0.0); fft.get_inplace_scratch_len()];
    let mut mag = vec![0.0f32; n_fft / 2 + 1];
    let mut data = Vec::with_capacity(frames * cfg.mel_bands);
    let mut row = vec![0.0f32; cfg.mel_bands];
    for t in 0..frames {
        let start = (t * cfg.hop_size) as isize - pad;
        for (n, slot) in buf.iter_mut().enumerate() {
            let s = w.samples[reflect(start + n as isize, len)];
            *slot = Complex::new(s * window[n], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (m, c) in mag.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        bank.apply(&mag, &mut row);
        data.extend(
            row.iter()
                .map(|&e| if e > cfg.log_floor { e.ln() } else { floor_ln }),
        );
    }
    let rate = FrameRate::new(cfg.sample_rate, cfg.hop_size as u32)
        .ok_or(FrontendError::InvalidConfig("frame rate is zero"))?;
    Ok(FrameMatrix {
        data: Matrix::new(frames, cfg.mel_bands, data),
        base_frame_rate: rate,
        source_duration_sec: w.duration_sec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, n: usize, sr: u32, amp: f32) -> Waveform {
        let samples = (0..n)
            .map(|i| {
                amp * (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(sr)).sin() as f32
            })
            .collect();
        Waveform {
            samples,
            sample_rate: sr,
        }
    }

    #[test]
    fn reflect_matches_numpy_reflect_mode() {
        let len = 4;
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, len)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect(-5, 1), 0);
    }

    #[test]
    fn one_second_gives_75_frames() {
        let w = sine(440.0, 24_000, 24_000, 0.5);
        let fm = compute_frames(&w, &FrontendConfig::default()).unwrap();
        assert_eq!(fm.frames(), 75);
        assert_eq!(fm.dim(), 80);
        assert_eq!(fm.base_frame_rate.hz(), 75.0);
        assert_eq!(fm.source_duration_sec, 1.0);
    }

    #[test]
    fn frame_count_is_ceil() {
        let cfg = FrontendConfig::default();
        for n in [1usize, 319, 320, 321, 24_001] {
            let w = Waveform {
                samples: vec![0.1; n],
                sample_rate: 24_000,
            };
            assert_eq!(compute_frames(&w, &cfg).unwrap().frames(), n.div_ceil(320));
        }
    }

    #[test]
    fn silence_sits_on_the_floor() {
        let cfg = FrontendConfig::default();
        let w = Waveform {
            samples: vec![0.0; 4800],
            sample_rate: 24_000,
        };
        let fm = compute_frames(&w, &cfg).unwrap();
        let floor = cfg.log_floor.ln();
        assert!(fm.data.as_slice().iter().all(|&v| v == floor));
    }

    #[test]
    fn mismatched_rate_and_bad_config_rejected() {
        let w = sine(440.0, 1000, 16_000, 0.5);
        assert!(matches!(
            compute_frames(&w, &FrontendConfig::default()),
            Err(FrontendError::SampleRateMismatch { .. })
        ));
        let cfg = FrontendConfig {
            sample_rate: 16_000,
            hop_size: 0,
            ..FrontendConfig::default()
        };
        assert!(matches!(
            compute_frames(&w, &cfg),
            Err(FrontendError::InvalidConfig(_))
        ));
        let cfg = FrontendConfig {
            sample_rate: 16_000,
            fft_size: 128,
            hop_size: 256,
            ..FrontendConfig::default()
        };
        assert!(matches!(
            compute_frames(&w, &cfg),
            Err(FrontendError::InvalidConfig(_))
        ));
        let empty = Waveform {
            samples: vec![],
            sample_rate: 24_000,
        };
        assert!(matches!(
            compute_frames(&empty, &FrontendConfig::default()),
            Err(FrontendError::ZeroLength)
        ));
    }

    #[test]
    fn filterbank_edges_are_monotone() {
        let bank = MelFilterbank::new(24_000, 1024, 80);
        assert_eq!(bank.bands(), 80);
        for b in 0..80 {
            let (lo, c, hi) = bank.band_hz(b);
            assert!(lo < c && c < hi);
        }
        assert!((bank.band_hz(79).2 - 12_000.0).abs() < 1e-6);
    }
}
