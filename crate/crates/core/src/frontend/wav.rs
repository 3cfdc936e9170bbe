//! Minimal RIFF/WAVE support: PCM 16/24-bit integer and 32-bit float,
//! including `WAVE_FORMAT_EXTENSIBLE` headers.

use super::{FrontendError, Waveform};
use std::path::Path;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavSpec {
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub format: SampleFormat,
}

fn wav_err(msg: impl Into<String>) -> FrontendError {
    FrontendError::Wav(msg.into())
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Parses a WAV image into its spec and interleaved samples in `[-1, 1]`.
pub fn parse_wav(bytes: &[u8]) -> Result<(WavSpec, Vec<f32>), FrontendError> {
    if bytes.is_empty() {
        return Err(FrontendError::ZeroLength);
    }
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err("missing RIFF/WAVE header"));
    }
    let mut pos = 12;
    let mut spec = None;
    let mut data = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        // Streaming writers may leave the data size unset; clamp to the file.
        let body_end = body_start.saturating_add(size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => spec = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }
    let spec = spec.ok_or_else(|| wav_err("missing fmt chunk"))?;
    let data = data.ok_or_else(|| wav_err("missing data chunk"))?;
    let samples = decode(&spec, data)?;
    Ok((spec, samples))
}

fn parse_fmt(body: &[u8]) -> Result<WavSpec, FrontendError> {
    if body.len() < 16 {
        return Err(wav_err("short fmt chunk"));
    }
    let mut tag = le_u16(&body[0..2]);
    let channels = le_u16(&body[2..4]);
    let sample_rate = le_u32(&body[4..8]);
    let bits_per_sample = le_u16(&body[14..16]);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 40 {
            return Err(wav_err("short extensible fmt chunk"));
        }
        tag = le_u16(&body[24..26]);
    }
    let format = match tag {
        FORMAT_PCM => SampleFormat::Int,
        FORMAT_FLOAT => SampleFormat::Float,
        other => {
            return Err(FrontendError::UnsupportedEncoding(format!(
                "format tag {other:#x}"
            )))
        }
    };
    if channels == 0 {
        return Err(wav_err("zero channels"));
    }
    if sample_rate == 0 {
        return Err(wav_err("zero sample rate"));
    }
    Ok(WavSpec {
        channels,
        sample_rate,
        bits_per_sample,
        format,
    })
}

fn decode(spec: &WavSpec, data: &[u8]) -> Result<Vec<f32>, FrontendError> {
    let samples: Vec<f32> = match (spec.format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => data
            .chunks_exact(2)
            .map(|b| f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
            .collect(),
        (SampleFormat::Int, 24) => data
            .chunks_exact(3)
            .map(|b| (i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) as f32 / 8_388_608.0)
            .collect(),
        (SampleFormat::Float, 32) => data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        (fmt, bits) => {
            return Err(FrontendError::UnsupportedEncoding(format!(
                "{fmt:?} {bits}-bit"
            )));
        }
    };
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(wav_err("non-finite sample"));
    }
    Ok(samples)
}

/// Reads a PCM WAV file (16/24-bit integer or 32-bit float) and downmixes to
/// mono by averaging channels.
pub fn load_audio(path: impl AsRef<Path>) -> Result<Waveform, FrontendError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| FrontendError::Io {
        path: path.to_owned(),
        source,
    })?;
    let (spec, interleaved) = parse_wav(&bytes)?;
    let channels = usize::from(spec.channels);
    if interleaved.len() < channels {
        return Err(FrontendError::ZeroLength);
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };
    Ok(Waveform {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Encodes interleaved samples. Integer formats are clipped to `[-1, 1]`.
pub fn encode_wav(spec: &WavSpec, interleaved: &[f32]) -> Result<Vec<u8>, FrontendError> {
    let bytes_per = usize::from(spec.bits_per_sample / 8);
    let tag = match (spec.format, spec.bits_per_sample) {
        (SampleFormat::Int, 16 | 24) => FORMAT_PCM,
        (SampleFormat::Float, 32) => FORMAT_FLOAT,
        (fmt, bits) => {
            return Err(FrontendError::UnsupportedEncoding(format!(
                "{fmt:?} {bits}-bit"
            )))
        }
    };
    let data_len = interleaved.len() * bytes_per;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&spec.channels.to_le_bytes());
    out.extend_from_slice(&spec.sample_rate.to_le_bytes());
    let block_align = spec.channels * (spec.bits_per_sample / 8);
    out.extend_from_slice(&(spec.sample_rate * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&spec.bits_per_sample.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in interleaved {
        match (spec.format, spec.bits_per_sample) {
            (SampleFormat::Int, 16) => out
                .extend_from_slice(&((s.clamp(-1.0, 1.0) * 32767.0).round() as i16).to_le_bytes()),
            (SampleFormat::Int, _) => {
                let v = (s.clamp(-1.0, 1.0) * 8_388_607.0).round() as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            (SampleFormat::Float, _) => out.extend_from_slice(&s.to_le_bytes()),
        }
    }
    Ok(out)
}

/// Writes mono 16-bit PCM.
pub fn write_wav_pcm16(path: impl AsRef<Path>, w: &Waveform) -> Result<(), FrontendError> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        format: SampleFormat::Int,
    };
    std::fs::write(path, encode_wav(&spec, &w.samples)?).map_err(|source| FrontendError::Io {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(channels: u16, bits: u16, format: SampleFormat) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: 24_000,
            bits_per_sample: bits,
            format,
        }
    }

    fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn one_second_mono_16bit() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<f32> = (0..24_000).map(|i| (i % 100) as f32 / 200.0).collect();
        let p = write(
            &dir,
            "a.wav",
            &encode_wav(&spec(1, 16, SampleFormat::Int), &samples).unwrap(),
        );
        let w = load_audio(&p).unwrap();
        assert_eq!(w.samples.len(), 24_000);
        assert_eq!(w.sample_rate, 24_000);
        assert!(w.samples.iter().all(|s| (-1.0..=1.0).contains(s)));
    }

    #[test]
    fn antiphase_stereo_averages_to_silence() {
        let dir = tempfile::tempdir().unwrap();
        let inter: Vec<f32> = (0..2000)
            .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        let p = write(
            &dir,
            "s.wav",
            &encode_wav(&spec(2, 16, SampleFormat::Int), &inter).unwrap(),
        );
        let w = load_audio(&p).unwrap();
        assert_eq!(w.samples.len(), 1000);
        assert!(w.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn float_and_24bit_decode() {
        let dir = tempfile::tempdir().unwrap();
        let vals = [0.25f32, -0.5, 0.75];
        let p = write(
            &dir,
            "f.wav",
            &encode_wav(&spec(1, 32, SampleFormat::Float), &vals).unwrap(),
        );
        assert_eq!(load_audio(&p).unwrap().samples, vals);
        let p = write(
            &dir,
            "i24.wav",
            &encode_wav(&spec(1, 24, SampleFormat::Int), &vals).unwrap(),
        );
        for (a, b) in load_audio(&p).unwrap().samples.iter().zip(vals) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn extensible_header_and_odd_chunks() {
        // fmt chunk in WAVE_FORMAT_EXTENSIBLE form plus an odd-sized LIST chunk.
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF\0\0\0\0WAVE");
        b.extend_from_slice(b"LIST");
        b.extend_from_slice(&3u32.to_le_bytes());
        b.extend_from_slice(b"abc\0");
        b.extend_from_slice(b"fmt ");
        b.extend_from_slice(&40u32.to_le_bytes());
        b.extend_from_slice(&FORMAT_EXTENSIBLE.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&16_000u32.to_le_bytes());
        b.extend_from_slice(&32_000u32.to_le_bytes());
        b.extend_from_slice(&2u16.to_le_bytes());
        b.extend_from_slice(&16u16.to_le_bytes());
        b.extend_from_slice(&22u16.to_le_bytes());
        b.extend_from_slice(&16u16.to_le_bytes());
        b.extend_from_slice(&4u32.to_le_bytes());
        b.extend_from_slice(&FORMAT_PCM.to_le_bytes());
        b.extend_from_slice(&[0u8; 14]);
        b.extend_from_slice(b"data");
        b.extend_from_slice(&4u32.to_le_bytes());
        b.extend_from_slice(&16384i16.to_le_bytes());
        b.extend_from_slice(&(-16384i16).to_le_bytes());
        let (s, samples) = parse_wav(&b).unwrap();
        assert_eq!(s.sample_rate, 16_000);
        assert_eq!(samples, vec![0.5, -0.5]);
    }

    #[test]
    fn empty_inputs_are_zero_length() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "empty.wav", b"");
        assert!(matches!(load_audio(&p), Err(FrontendError::ZeroLength)));
        let p = write(
            &dir,
            "nosamples.wav",
            &encode_wav(&spec(1, 16, SampleFormat::Int), &[]).unwrap(),
        );
        assert!(matches!(load_audio(&p), Err(FrontendError::ZeroLength)));
    }

    #[test]
    fn eight_bit_is_unsupported() {
        let mut b = encode_wav(&spec(1, 16, SampleFormat::Int), &[0.0; 4]).unwrap();
        // Rewrite bits-per-sample to 8.
        b[34..36].copy_from_slice(&8u16.to_le_bytes());
        assert!(matches!(
            parse_wav(&b),
            Err(FrontendError::UnsupportedEncoding(_))
        ));
        let mut alaw = encode_wav(&spec(1, 16, SampleFormat::Int), &[0.0; 4]).unwrap();
        alaw[20..22].copy_from_slice(&6u16.to_le_bytes());
        assert!(matches!(
            parse_wav(&alaw),
            Err(FrontendError::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn garbage_is_unreadable() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "junk.wav", b"definitely not riff");
        assert!(matches!(load_audio(&p), Err(FrontendError::Wav(_))));
        assert!(matches!(
            load_audio(dir.path().join("missing.wav")),
            Err(FrontendError::Io { .. })
        ));
    }
}
