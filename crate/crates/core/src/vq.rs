//! Single-codebook vector quantizer with EMA updates and random awakening.
//!
//! Codebook file layout (`VSCB`, little-endian):
//! magic, version u16, K u32, H u32, decay f32, K·H f32 code vectors,
//! then the 32-byte SHA-256 content hash of the vectors.

use crate::binio::{put_f32, put_u16, put_u32, ByteReader};
use crate::matrix::Matrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CODEBOOK_MAGIC: &[u8; 4] = b"VSCB";
pub const CODEBOOK_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum VqError {
    #[error("dimension mismatch: vector has {found}, codebook has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("empty batch")]
    EmptyBatch,
    #[error("no training data")]
    EmptyStream,
    #[error("only {distinct} distinct training vectors for {requested} codes")]
    NotEnoughDistinct { distinct: usize, requested: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic in codebook file")]
    BadMagic,
    #[error("unsupported codebook file version {0}")]
    Version(u16),
    #[error("codebook file is truncated or has trailing bytes")]
    CorruptLength,
    #[error("codebook content hash mismatch")]
    HashMismatch,
}

/// SHA-256 over `K`, `H` and the little-endian code vectors.
fn content_hash(vectors: &Matrix) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((vectors.rows() as u32).to_le_bytes());
    h.update((vectors.cols() as u32).to_le_bytes());
    for v in vectors.as_slice() {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

/// `K × H` code table with its EMA statistics.
///
/// Vectors are only mutated through methods that refresh the content hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: Matrix,
    ema_counts: Vec<f64>,
    ema_sums: Vec<f64>,
    decay: f32,
    hash: [u8; 32],
}

impl Codebook {
    pub fn from_vectors(vectors: Matrix, decay: f32) -> Result<Self, VqError> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(VqError::EmptyCodebook);
        }
        if !vectors.is_finite() {
            return Err(VqError::NonFinite);
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(VqError::InvalidConfig("decay must lie in (0, 1)"));
        }
        let k = vectors.rows();
        let h = vectors.cols();
        let hash = content_hash(&vectors);
        Ok(Self {
            vectors,
            ema_counts: vec![0.0; k],
            ema_sums: vec![0.0; k * h],
            decay,
            hash,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn decay(&self) -> f32 {
        self.decay
    }

    pub fn vector(&self, k: usize) -> &[f32] {
        self.vectors.row(k)
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn ema_counts(&self) -> &[f64] {
        &self.ema_counts
    }

    pub fn content_hash(&self) -> [u8; 32] {
        self.hash
    }

    pub fn hash_hex(&self) -> String {
        self.hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn rehash(&mut self) {
        self.hash = content_hash(&self.vectors);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18 + self.vectors.as_slice().len() * 4 + 32);
        out.extend_from_slice(CODEBOOK_MAGIC);
        put_u16(&mut out, CODEBOOK_VERSION);
        put_u32(&mut out, self.len() as u32);
        put_u32(&mut out, self.dim() as u32);
        put_f32(&mut out, self.decay);
        for &v in self.vectors.as_slice() {
            put_f32(&mut out, v);
        }
        out.extend_from_slice(&self.hash);
        out
    }

    /// Parses a `VSCB` image and verifies its stored hash. EMA statistics
    /// are not persisted and start from zero.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VqError> {
        let mut r = ByteReader::new(bytes);
        let corrupt = |_| VqError::CorruptLength;
        if r.take(4).map_err(corrupt)? != CODEBOOK_MAGIC {
            return Err(VqError::BadMagic);
        }
        let version = r.u16().map_err(corrupt)?;
        if version != CODEBOOK_VERSION {
            return Err(VqError::Version(version));
        }
        let k = r.u32().map_err(corrupt)? as usize;
        let h = r.u32().map_err(corrupt)? as usize;
        let decay = r.f32().map_err(corrupt)?;
        let n = k.checked_mul(h).ok_or(VqError::CorruptLength)?;
        if r.remaining()
            != n.checked_mul(4)
                .and_then(|b| b.checked_add(32))
                .ok_or(VqError::CorruptLength)?
        {
            return Err(VqError::CorruptLength);
        }
        let data = (0..n)
            .map(|_| r.f32())
            .collect::<Result<Vec<_>, _>>()
            .map_err(corrupt)?;
        let stored = r.hash().map_err(corrupt)?;
        let cb = Self::from_vectors(Matrix::new(k, h, data), decay)?;
        if cb.hash != stored {
            return Err(VqError::HashMismatch);
        }
        Ok(cb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), VqError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| VqError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VqError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| VqError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Nearest code by squared L2; ties go to the lowest index.
    fn nearest(&self, z: &[f32]) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (k, e) in self.vectors.iter_rows().enumerate() {
            let d2: f64 = z
                .iter()
                .zip(e)
                .map(|(&a, &b)| {
                    let d = f64::from(a) - f64::from(b);
                    d * d
                })
                .sum();
            if d2 < best.1 {
                best = (k, d2);
            }
        }
        (best.0, best.1.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub index: usize,
    pub vector: Vec<f32>,
    pub distance: f64,
}

pub fn quantize(z: &[f32], cb: &Codebook) -> Result<Quantized, VqError> {
    if cb.is_empty() {
        return Err(VqError::EmptyCodebook);
    }
    if z.len() != cb.dim() {
        return Err(VqError::DimensionMismatch {
            expected: cb.dim(),
            found: z.len(),
        });
    }
    let (index, distance) = cb.nearest(z);
    Ok(Quantized {
        index,
        vector: cb.vector(index).to_vec(),
        distance,
    })
}

/// Row-wise [`quantize`]. Returns code indices and the quantized rows.
pub fn quantize_batch(z: &Matrix, cb: &Codebook) -> Result<(Vec<u32>, Matrix), VqError> {
    if cb.is_empty() {
        return Err(VqError::EmptyCodebook);
    }
    if z.rows() > 0 && z.cols() != cb.dim() {
        return Err(VqError::DimensionMismatch {
            expected: cb.dim(),
            found: z.cols(),
        });
    }
    let mut indices = Vec::with_capacity(z.rows());
    let mut out = Matrix::zeros(0, cb.dim());
    for row in z.iter_rows() {
        let (k, _) = cb.nearest(row);
        indices.push(k as u32);
        out.push_row(cb.vector(k));
    }
    Ok((indices, out))
}

/// Sum over rows of the L2 distance to the assigned code, with codes held
/// constant.
pub fn commitment_loss(z: &Matrix, cb: &Codebook) -> Result<f64, VqError> {
    if z.rows() == 0 {
        return Err(VqError::EmptyBatch);
    }
    if cb.is_empty() {
        return Err(VqError::EmptyCodebook);
    }
    if z.cols() != cb.dim() {
        return Err(VqError::DimensionMismatch {
            expected: cb.dim(),
            found: z.cols(),
        });
    }
    Ok(z.iter_rows().map(|row| cb.nearest(row).1).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub codebook_size: usize,
    pub decay: f32,
    pub epochs: usize,
    pub seed: u64,
    /// A code is awakened when its bias-corrected EMA count falls below
    /// `awaken_fraction · batch_rows / K`.
    pub awaken_fraction: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            codebook_size: 4096,
            decay: 0.99,
            epochs: 20,
            seed: 0,
            awaken_fraction: 0.01,
            epsilon: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Awakening {
    pub epoch: usize,
    pub batch: usize,
    pub code: usize,
    /// Row of the triggering batch the code was reset to.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub commitment_loss_per_epoch: Vec<f64>,
    /// Fraction of codes assigned at least once during the final epoch.
    pub codebook_usage: f64,
    pub awakenings: usize,
    pub awakening_log: Vec<Awakening>,
}

/// Picks `k` distinct training vectors (by bit pattern) as initial codes.
fn initial_codes(batches: &[Matrix], k: usize, rng: &mut ChaCha8Rng) -> Result<Matrix, VqError> {
    let dim = batches[0].cols();
    let mut seen = HashSet::new();
    let mut distinct: Vec<&[f32]> = Vec::new();
    for row in batches.iter().flat_map(|b| b.iter_rows()) {
        let key: Vec<u32> = row.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            distinct.push(row);
        }
    }
    if distinct.len() < k {
        return Err(VqError::NotEnoughDistinct {
            distinct: distinct.len(),
            requested: k,
        });
    }
    let mut m = Matrix::zeros(0, dim);
    for i in index::sample(rng, distinct.len(), k).iter() {
        m.push_row(distinct[i]);
    }
    Ok(m)
}

/// EMA k-means over a fixed sequence of batches, replayed `epochs` times.
pub fn train_codebook(
    batches: &[Matrix],
    cfg: &TrainConfig,
) -> Result<(Codebook, TrainReport), VqError> {
    if cfg.codebook_size == 0 {
        return Err(VqError::InvalidConfig("codebook_size must be at least 1"));
    }
    if cfg.epochs == 0 {
        return Err(VqError::InvalidConfig("epochs must be at least 1"));
    }
    if !(cfg.awaken_fraction >= 0.0 && cfg.epsilon > 0.0) {
        return Err(VqError::InvalidConfig(
            "awaken_fraction and epsilon must be non-negative",
        ));
    }
    let batches: Vec<Matrix> = batches.iter().filter(|b| b.rows() > 0).cloned().collect();
    let Some(first) = batches.first() else {
        return Err(VqError::EmptyStream);
    };
    let dim = first.cols();
    for b in &batches {
        if b.cols() != dim {
            return Err(VqError::DimensionMismatch {
                expected: dim,
                found: b.cols(),
            });
        }
        if !b.is_finite() {
            return Err(VqError::NonFinite);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cb = Codebook::from_vectors(
        initial_codes(&batches, cfg.codebook_size, &mut rng)?,
        cfg.decay,
    )?;
    run_epochs(cb, &batches, cfg, &mut rng)
}

/// Continues EMA training from an existing codebook. `cfg.codebook_size` and
/// `cfg.decay` are taken from `cb`.
pub fn refine_codebook(
    cb: Codebook,
    batches: &[Matrix],
    cfg: &TrainConfig,
) -> Result<(Codebook, TrainReport), VqError> {
    let batches: Vec<Matrix> = batches.iter().filter(|b| b.rows() > 0).cloned().collect();
    if batches.is_empty() {
        return Err(VqError::EmptyStream);
    }
    for b in &batches {
        if b.cols() != cb.dim() {
            return Err(VqError::DimensionMismatch {
                expected: cb.dim(),
                found: b.cols(),
            });
        }
    }
    if cfg.epochs == 0 {
        return Err(VqError::InvalidConfig("epochs must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_epochs(cb, &batches, cfg, &mut rng)
}

fn run_epochs(
    mut cb: Codebook,
    batches: &[Matrix],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Codebook, TrainReport), VqError> {
    let k = cb.len();
    let dim = cb.dim();
    let gamma = f64::from(cb.decay);

    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut log = Vec::new();
    let mut used = vec![false; k];
    let mut counts = vec![0.0f64; k];
    let mut sums = vec![0.0f64; k * dim];
    let mut gamma_pow = 1.0f64;

    for epoch in 0..cfg.epochs {
        let mut loss = 0.0;
        used.iter_mut().for_each(|u| *u = false);
        for (bi, batch) in batches.iter().enumerate() {
            counts.iter_mut().for_each(|c| *c = 0.0);
            sums.iter_mut().for_each(|s| *s = 0.0);
            for row in batch.iter_rows() {
                let (code, dist) = cb.nearest(row);
                loss += dist;
                used[code] = true;
                counts[code] += 1.0;
                for (s, &v) in sums[code * dim..(code + 1) * dim].iter_mut().zip(row) {
                    *s += f64::from(v);
                }
            }

            gamma_pow *= gamma;
            for c in 0..k {
                cb.ema_counts[c] = gamma * cb.ema_counts[c] + (1.0 - gamma) * counts[c];
                let denom = cb.ema_counts[c].max(cfg.epsilon);
                // A code with no mass yet keeps its vector instead of collapsing to zero.
                let live = cb.ema_counts[c] > cfg.epsilon;
                let ema = &mut cb.ema_sums[c * dim..(c + 1) * dim];
                let vec = cb.vectors.row_mut(c);
                for ((e, &s), v) in ema.iter_mut().zip(&sums[c * dim..(c + 1) * dim]).zip(vec) {
                    *e = gamma * *e + (1.0 - gamma) * s;
                    if live {
                        *v = (*e / denom) as f32;
                    }
                }
            }

            // Bias-corrected counts are in assignments per batch.
            let correction = 1.0 - gamma_pow;
            let threshold = cfg.awaken_fraction * batch.rows() as f64 / k as f64;
            for c in 0..k {
                if cb.ema_counts[c] / correction < threshold {
                    let row = rng.random_range(0..batch.rows());
                    let grace = threshold * correction;
                    cb.ema_counts[c] = grace;
                    let src = batch.row(row);
                    cb.vectors.row_mut(c).copy_from_slice(src);
                    for (e, &v) in cb.ema_sums[c * dim..(c + 1) * dim].iter_mut().zip(src) {
                        *e = f64::from(v) * grace;
                    }
                    log.push(Awakening {
                        epoch,
                        batch: bi,
                        code: c,
                        row,
                    });
                }
            }
        }
        losses.push(loss);
    }
    cb.rehash();
    let usage = used.iter().filter(|&&u| u).count() as f64 / k as f64;
    Ok((
        cb,
        TrainReport {
            epochs_run: cfg.epochs,
            commitment_loss_per_epoch: losses,
            codebook_usage: usage,
            awakenings: log.len(),
            awakening_log: log,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cb(rows: &[Vec<f32>]) -> Codebook {
        Codebook::from_vectors(Matrix::from_rows(rows).unwrap(), 0.99).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, h: usize) -> Matrix {
        Matrix::new(
            n,
            h,
            (0..n * h).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
    }

    #[test]
    fn exact_member_and_tie() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let book = Codebook::from_vectors(random_matrix(&mut rng, 10, 4), 0.99).unwrap();
        let q = quantize(book.vector(7), &book).unwrap();
        assert_eq!((q.index, q.distance), (7, 0.0));
        assert_eq!(q.vector, book.vector(7));

        let tie = cb(&[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert_eq!(quantize(&[0.0, 5.0], &tie).unwrap().index, 0);
    }

    #[test]
    fn quantize_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let book = Codebook::from_vectors(random_matrix(&mut rng, 16, 3), 0.99).unwrap();
        for _ in 0..200 {
            let z: Vec<f32> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mut best = (0, f64::INFINITY);
            for k in 0..16 {
                let d: f64 = (0..3)
                    .map(|i| (f64::from(z[i]) - f64::from(book.vector(k)[i])).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d < best.1 {
                    best = (k, d);
                }
            }
            let q = quantize(&z, &book).unwrap();
            assert_eq!(q.index, best.0);
            assert_abs_diff_eq!(q.distance, best.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantize_errors() {
        let book = cb(&[vec![1.0, 0.0]]);
        assert!(matches!(
            quantize(&[1.0], &book),
            Err(VqError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Codebook::from_vectors(Matrix::zeros(0, 2), 0.99),
            Err(VqError::EmptyCodebook)
        ));
    }

    #[test]
    fn batch_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let book = Codebook::from_vectors(random_matrix(&mut rng, 8, 3), 0.99).unwrap();
        let (idx, q) = quantize_batch(&Matrix::zeros(0, 3), &book).unwrap();
        assert!(idx.is_empty());
        assert_eq!(q.rows(), 0);

        let same = Matrix::new(3, 3, [0.2f32, -0.4, 0.9].repeat(3));
        let (idx, _) = quantize_batch(&same, &book).unwrap();
        assert!(idx.iter().all(|&i| i == idx[0]));

        let z = random_matrix(&mut rng, 25, 3);
        let (idx, q) = quantize_batch(&z, &book).unwrap();
        for (n, row) in z.iter_rows().enumerate() {
            let single = quantize(row, &book).unwrap();
            assert_eq!(idx[n] as usize, single.index);
            assert_eq!(q.row(n), single.vector.as_slice());
        }
    }

    #[test]
    fn commitment_loss_examples() {
        let book = cb(&[vec![0.0, 0.0], vec![10.0, 0.0]]);
        let on_codes = Matrix::from_rows(&[[0.0f32, 0.0], [10.0, 0.0]]).unwrap();
        assert_eq!(commitment_loss(&on_codes, &book).unwrap(), 0.0);
        let one = Matrix::from_rows(&[[0.0f32, 2.0]]).unwrap();
        assert_eq!(commitment_loss(&one, &book).unwrap(), 2.0);
        assert!(matches!(
            commitment_loss(&Matrix::zeros(0, 2), &book),
            Err(VqError::EmptyBatch)
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = random_matrix(&mut rng, 30, 2);
        let expected: f64 = z
            .iter_rows()
            .map(|r| quantize(r, &book).unwrap().distance)
            .sum();
        assert_abs_diff_eq!(
            commitment_loss(&z, &book).unwrap(),
            expected,
            epsilon = 1e-9
        );
    }

    #[test]
    fn single_code_tracks_the_ema_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let batches: Vec<Matrix> = (0..5).map(|_| random_matrix(&mut rng, 20, 3)).collect();
        let cfg = TrainConfig {
            codebook_size: 1,
            epochs: 3,
            ..TrainConfig::default()
        };
        let (book, report) = train_codebook(&batches, &cfg).unwrap();
        assert_eq!(report.awakenings, 0);
        // Replay the EMA independently: every vector lands on the single code.
        let g = 0.99f64;
        let (mut c, mut s) = (0.0f64, [0.0f64; 3]);
        for _ in 0..3 {
            for b in &batches {
                c = g * c + (1.0 - g) * b.rows() as f64;
                for (i, si) in s.iter_mut().enumerate() {
                    let sum: f64 = b.iter_rows().map(|r| f64::from(r[i])).sum();
                    *si = g * *si + (1.0 - g) * sum;
                }
            }
        }
        for i in 0..3 {
            assert_abs_diff_eq!(f64::from(book.vector(0)[i]), s[i] / c, epsilon = 1e-6);
        }
    }

    #[test]
    fn exact_copies_are_a_fixed_point() {
        let protos = [[1.0f32, 0.0], [0.0, 1.0], [-1.0, -1.0]];
        let rows: Vec<[f32; 2]> = (0..30).map(|i| protos[i % 3]).collect();
        let batches = vec![Matrix::from_rows(&rows).unwrap()];
        let cfg = TrainConfig {
            codebook_size: 3,
            epochs: 5,
            ..TrainConfig::default()
        };
        let (book, report) = train_codebook(&batches, &cfg).unwrap();
        assert_eq!(report.awakenings, 0);
        assert!(report.commitment_loss_per_epoch.iter().all(|&l| l == 0.0));
        assert_eq!(report.codebook_usage, 1.0);
        for p in protos {
            assert_eq!(quantize(&p, &book).unwrap().distance, 0.0);
        }
    }

    #[test]
    fn too_few_distinct_vectors() {
        let batches = vec![Matrix::from_rows(&[[1.0f32], [1.0], [2.0]]).unwrap()];
        let cfg = TrainConfig {
            codebook_size: 3,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_codebook(&batches, &cfg),
            Err(VqError::NotEnoughDistinct {
                distinct: 2,
                requested: 3
            })
        ));
        assert!(matches!(
            train_codebook(&[], &cfg),
            Err(VqError::EmptyStream)
        ));
    }

    #[test]
    fn awakened_codes_come_from_the_batch() {
        // Two far-apart points and four codes: two codes must die and be
        // reset to batch rows on the first batch.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut rows = Vec::new();
        for i in 0..40 {
            let base = if i % 2 == 0 { 0.0 } else { 10.0 };
            rows.push(vec![base + rng.random_range(-0.01f32..0.01), base]);
        }
        let batch = Matrix::from_rows(&rows).unwrap();
        let init_rows: Vec<Vec<f32>> = rows[..4].to_vec();
        let mut book = cb(&init_rows);
        // Push two codes far away so they receive no assignments.
        book.vectors.row_mut(2).copy_from_slice(&[1e3, 1e3]);
        book.vectors.row_mut(3).copy_from_slice(&[-1e3, 1e3]);
        let cfg = TrainConfig {
            codebook_size: 4,
            epochs: 1,
            seed: 5,
            ..TrainConfig::default()
        };
        let (trained, report) = refine_codebook(book, std::slice::from_ref(&batch), &cfg).unwrap();
        assert_eq!(report.awakenings, 2);
        for a in &report.awakening_log {
            assert_eq!(trained.vector(a.code), batch.row(a.row));
        }
        assert_eq!(report.awakenings, report.awakening_log.len());
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let batches: Vec<Matrix> = (0..4).map(|_| random_matrix(&mut rng, 64, 4)).collect();
        let cfg = TrainConfig {
            codebook_size: 8,
            epochs: 4,
            seed: 99,
            ..TrainConfig::default()
        };
        let a = train_codebook(&batches, &cfg).unwrap();
        let b = train_codebook(&batches, &cfg).unwrap();
        assert_eq!(a.0.to_bytes(), b.0.to_bytes());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let book = cb(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.25]]);
        let bytes = book.to_bytes();
        assert_eq!(bytes.len(), 18 + 6 * 4 + 32);
        let back = Codebook::from_bytes(&bytes).unwrap();
        assert_eq!(back.vectors(), book.vectors());
        assert_eq!(back.content_hash(), book.content_hash());

        assert!(matches!(
            Codebook::from_bytes(&bytes[..bytes.len() - 5]),
            Err(VqError::CorruptLength)
        ));
        let mut flipped = bytes.clone();
        flipped[18] ^= 1;
        assert!(matches!(
            Codebook::from_bytes(&flipped),
            Err(VqError::HashMismatch)
        ));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(
            Codebook::from_bytes(&magic),
            Err(VqError::BadMagic)
        ));
    }
}
