//! Externally produced frame embeddings.
//!
//! Binary layout (`VSEB`, all little-endian):
//!
//! | field            | type      |
//! |------------------|-----------|
//! | magic            | `b"VSEB"` |
//! | version          | u16 = 1   |
//! | H                | u32       |
//! | rate numerator   | u32       |
//! | rate denominator | u32       |
//! | T                | u64       |
//! | data             | T·H f32, row-major |
//!
//! The CSV form is one frame per line, comma separated, with no header. It
//! carries no rate, so the caller supplies one.

use super::FrontendError;
use crate::binio::{put_f32, put_u16, put_u32, put_u64, ByteReader};
use crate::matrix::{FrameMatrix, FrameRate, Matrix};
use std::path::Path;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"VSEB";
pub const EMBEDDING_VERSION: u16 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FrontendError + '_ {
    move |source| FrontendError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Loads a `VSEB` or CSV embedding file, detected by magic bytes.
///
/// `dim` is the expected row length; `None` accepts whatever the file holds.
/// `csv_rate` is used only for CSV input.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    dim: Option<usize>,
    csv_rate: FrameRate,
) -> Result<FrameMatrix, FrontendError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    read_embeddings(&bytes, dim, csv_rate)
}

pub fn read_embeddings(
    bytes: &[u8],
    dim: Option<usize>,
    csv_rate: FrameRate,
) -> Result<FrameMatrix, FrontendError> {
    if bytes.is_empty() {
        return Err(FrontendError::Empty);
    }
    if bytes.starts_with(EMBEDDING_MAGIC) {
        read_bin(bytes, dim)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| FrontendError::BadMagic)?;
        read_csv(text, dim, csv_rate)
    }
}

fn read_bin(bytes: &[u8], dim: Option<usize>) -> Result<FrameMatrix, FrontendError> {
    let mut r = ByteReader::new(bytes);
    let corrupt = |_| FrontendError::CorruptLength;
    if r.take(4).map_err(corrupt)? != EMBEDDING_MAGIC {
        return Err(FrontendError::BadMagic);
    }
    let version = r.u16().map_err(corrupt)?;
    if version != EMBEDDING_VERSION {
        return Err(FrontendError::Version(version));
    }
    let h = r.u32().map_err(corrupt)? as usize;
    let num = r.u32().map_err(corrupt)?;
    let den = r.u32().map_err(corrupt)?;
    let t = r.u64().map_err(corrupt)?;
    let rate = FrameRate::new(num, den)
        .ok_or(FrontendError::InvalidConfig("zero frame rate in header"))?;
    if h == 0 {
        return Err(FrontendError::InvalidConfig(
            "zero embedding width in header",
        ));
    }
    if let Some(expected) = dim {
        if expected != h {
            return Err(FrontendError::RowLength {
                row: 0,
                expected,
                found: h,
            });
        }
    }
    if t == 0 {
        return Err(FrontendError::Empty);
    }
    let count = usize::try_from(t)
        .ok()
        .and_then(|t| t.checked_mul(h))
        .ok_or(FrontendError::CorruptLength)?;
    if r.remaining() != count.checked_mul(4).ok_or(FrontendError::CorruptLength)? {
        return Err(FrontendError::CorruptLength);
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let v = r.f32().map_err(corrupt)?;
        if !v.is_finite() {
            return Err(FrontendError::NonFinite {
                row: i / h,
                col: i % h,
            });
        }
        data.push(v);
    }
    Ok(FrameMatrix::frame_aligned(
        Matrix::new(t as usize, h, data),
        rate,
    ))
}

fn read_csv(text: &str, dim: Option<usize>, rate: FrameRate) -> Result<FrameMatrix, FrontendError> {
    let mut width = dim;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for (col, field) in line.split(',').enumerate() {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|e: std::num::ParseFloatError| FrontendError::Parse {
                    row: rows,
                    msg: format!("column {col}: {e}"),
                })?;
            if !v.is_finite() {
                return Err(FrontendError::NonFinite { row: rows, col });
            }
            data.push(v);
        }
        let found = data.len() - before;
        let expected = *width.get_or_insert(found);
        if found != expected {
            return Err(FrontendError::RowLength {
                row: rows,
                expected,
                found,
            });
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(FrontendError::Empty);
    }
    let h = width.unwrap_or(0);
    Ok(FrameMatrix::frame_aligned(Matrix::new(rows, h, data), rate))
}

pub fn write_embeddings_bin(path: impl AsRef<Path>, fm: &FrameMatrix) -> Result<(), FrontendError> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(26 + fm.data.as_slice().len() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    put_u16(&mut out, EMBEDDING_VERSION);
    put_u32(&mut out, fm.dim() as u32);
    put_u32(&mut out, fm.base_frame_rate.num);
    put_u32(&mut out, fm.base_frame_rate.den);
    put_u64(&mut out, fm.frames() as u64);
    for &v in fm.data.as_slice() {
        put_f32(&mut out, v);
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// `{}` formatting of `f32` is shortest-round-trip, so CSV output re-reads
/// bit-exactly.
pub fn write_embeddings_csv(path: impl AsRef<Path>, fm: &FrameMatrix) -> Result<(), FrontendError> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in fm.data.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RATE: FrameRate = FrameRate { num: 75, den: 1 };

    #[test]
    fn csv_three_by_two() {
        let fm = read_embeddings(b"1,2\n3.5,-4\n0,1e-3\n", None, RATE).unwrap();
        assert_eq!((fm.frames(), fm.dim()), (3, 2));
        assert_eq!(fm.data.as_slice(), &[1.0, 2.0, 3.5, -4.0, 0.0, 1e-3]);
        assert_eq!(fm.base_frame_rate, RATE);
        assert_eq!(fm.source_duration_sec, 3.0 / 75.0);
    }

    #[test]
    fn csv_validation() {
        assert!(matches!(
            read_embeddings(b"1,2\n3,NaN\n", None, RATE),
            Err(FrontendError::NonFinite { row: 1, col: 1 })
        ));
        assert!(matches!(
            read_embeddings(b"1,2\n3\n", None, RATE),
            Err(FrontendError::RowLength { row: 1, .. })
        ));
        assert!(matches!(
            read_embeddings(b"1,2,3\n", Some(2), RATE),
            Err(FrontendError::RowLength { row: 0, .. })
        ));
        assert!(matches!(
            read_embeddings(b"", None, RATE),
            Err(FrontendError::Empty)
        ));
        assert!(matches!(
            read_embeddings(b"\n\n", None, RATE),
            Err(FrontendError::Empty)
        ));
        assert!(matches!(
            read_embeddings(b"1,x\n", None, RATE),
            Err(FrontendError::Parse { .. })
        ));
    }

    #[test]
    fn binary_and_csv_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (t, h) = (7, 5);
        let data: Vec<f32> = (0..t * h).map(|_| rng.random_range(-3.0..3.0)).collect();
        let fm = FrameMatrix::frame_aligned(Matrix::new(t, h, data), RATE);
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("e.vseb");
        let csv = dir.path().join("e.csv");
        write_embeddings_bin(&bin, &fm).unwrap();
        write_embeddings_csv(&csv, &fm).unwrap();
        assert_eq!(
            std::fs::metadata(&bin).unwrap().len(),
            26 + 4 * (t * h) as u64
        );
        let a = load_embeddings(&bin, Some(h), FrameRate::new(1, 1).unwrap()).unwrap();
        let b = load_embeddings(&csv, Some(h), RATE).unwrap();
        assert_eq!(a, fm);
        assert_eq!(a, b);
    }

    #[test]
    fn binary_validation() {
        let fm = FrameMatrix::frame_aligned(Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]), RATE);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.vseb");
        write_embeddings_bin(&p, &fm).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(matches!(
            read_embeddings(&bytes[..bytes.len() - 1], None, RATE),
            Err(FrontendError::CorruptLength)
        ));
        assert!(matches!(
            read_embeddings(&bytes, Some(3), RATE),
            Err(FrontendError::RowLength { .. })
        ));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            read_embeddings(&bad, None, RATE),
            Err(FrontendError::Version(9))
        ));
        let mut nan = bytes;
        nan[26..30].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            read_embeddings(&nan, None, RATE),
            Err(FrontendError::NonFinite { row: 0, col: 0 })
        ));
    }
}
