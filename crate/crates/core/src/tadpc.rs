//! Temporal-aware density peak clustering.
//!
//! Every frame gets a peak score `s = ρ·δ` from its local density `ρ` (the
//! exponentiated mean similarity to its `m` most similar frames) and its peak
//! distance `δ` (dissimilarity to the nearest denser frame). Clusters are then
//! grown greedily: the unassigned frame with the highest score seeds a
//! cluster, which expands one frame at a time, alternating forward and
//! backward, while candidates satisfy `φ(seed, t) − β·s_t > τ` and the span
//! stays within `s_max`.
//!
//! Similarities use L2-normalised copies of the frames; pooling uses the
//! original frames. Scores are computed once per utterance, before any
//! cluster is formed.

use crate::matrix::{FrameMatrix, Matrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite input")]
    NonFinite,
    #[error("input has no frames")]
    Empty,
    #[error("invalid cluster params: {0}")]
    InvalidParams(&'static str),
    #[error("segmentation inconsistent with input: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Neighbour count for the density estimate.
    pub m: usize,
    /// Expansion threshold, strictly inside (0, 1).
    pub tau: f32,
    /// Penalty on absorbing frames that are strong seeds themselves.
    pub beta: f32,
    /// Maximum cluster duration in frames.
    pub s_max: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            m: 5,
            tau: 0.7,
            beta: 0.2,
            s_max: 4,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.m == 0 {
            return Err(ClusterError::InvalidParams("m must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ClusterError::InvalidParams("tau must lie in (0, 1)"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ClusterError::InvalidParams(
                "beta must be finite and non-negative",
            ));
        }
        if self.s_max == 0 {
            return Err(ClusterError::InvalidParams("s_max must be at least 1"));
        }
        Ok(())
    }
}

/// L2-normalised copy; the zero vector stays zero.
fn unit(v: &[f32]) -> Vec<f64> {
    let norm = v
        .iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|&x| f64::from(x) / norm).collect()
    }
}

/// `(1 + cos) / 2` on already-normalised vectors.
fn phi_unit(a: &[f64], b: &[f64]) -> f64 {
    let cos: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 + cos.clamp(-1.0, 1.0)) / 2.0
}

/// Normalised cosine similarity `(1 + cos(a, b)) / 2`, in `[0, 1]`.
/// A zero vector has cosine 0 with everything.
pub fn similarity(a: &[f32], b: &[f32]) -> Result<f64, ClusterError> {
    if a.len() != b.len() {
        return Err(ClusterError::DimensionMismatch(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    Ok(phi_unit(&unit(a), &unit(b)))
}

/// Normalised rows of a frame matrix, used for every similarity query.
struct UnitFrames {
    dim: usize,
    data: Vec<f64>,
}

impl UnitFrames {
    fn new(x: &Matrix) -> Self {
        let data = x.iter_rows().flat_map(unit).collect();
        Self {
            dim: x.cols(),
            data,
        }
    }

    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn phi(&self, i: usize, j: usize) -> f64 {
        phi_unit(self.row(i), self.row(j))
    }
}

fn check_frames(x: &FrameMatrix) -> Result<(), ClusterError> {
    if x.frames() == 0 || x.dim() == 0 {
        return Err(ClusterError::Empty);
    }
    if !x.data.is_finite() {
        return Err(ClusterError::NonFinite);
    }
    Ok(())
}

fn density_from(u: &UnitFrames, m: usize) -> Vec<f64> {
    let t = u.len();
    if t == 1 {
        return vec![1.0];
    }
    let k = m.min(t - 1);
    let mut sims = Vec::with_capacity(t - 1);
    (0..t)
        .map(|i| {
            sims.clear();
            sims.extend((0..t).filter(|&j| j != i).map(|j| u.phi(i, j)));
            sims.sort_unstable_by(|a, b| b.total_cmp(a));
            let mean = sims[..k].iter().sum::<f64>() / k as f64;
            mean.exp()
        })
        .collect()
}

fn peak_distance_from(u: &UnitFrames, rho: &[f64]) -> Vec<f64> {
    let t = u.len();
    if t == 1 {
        return vec![1.0];
    }
    (0..t)
        .map(|i| {
            let mut nearest_denser: Option<f64> = None;
            let mut farthest = f64::NEG_INFINITY;
            for j in (0..t).filter(|&j| j != i) {
                let d = 1.0 - u.phi(i, j);
                if rho[j] > rho[i] {
                    nearest_denser = Some(nearest_denser.map_or(d, |best| best.min(d)));
                }
                farthest = farthest.max(d);
            }
            nearest_denser.unwrap_or(farthest)
        })
        .collect()
}

/// Local density `ρ_i`: exp of the mean similarity to the `min(m, T−1)` most
/// similar other frames. A single frame has `ρ = 1`.
pub fn local_density(x: &FrameMatrix, m: usize) -> Result<Vec<f64>, ClusterError> {
    check_frames(x)?;
    if m == 0 {
        return Err(ClusterError::InvalidParams("m must be at least 1"));
    }
    Ok(density_from(&UnitFrames::new(&x.data), m))
}

/// Peak distance `δ_i`: `1 − φ` to the nearest frame of strictly greater
/// density, or the largest `1 − φ` to any other frame when none is denser.
pub fn peak_distance(x: &FrameMatrix, rho: &[f64]) -> Result<Vec<f64>, ClusterError> {
    check_frames(x)?;
    if rho.len() != x.frames() {
        return Err(ClusterError::LengthMismatch(rho.len(), x.frames()));
    }
    Ok(peak_distance_from(&UnitFrames::new(&x.data), rho))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakScores {
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub s: Vec<f64>,
}

impl PeakScores {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Density, distance and score for every frame of `x`.
    pub fn compute(x: &FrameMatrix, m: usize) -> Result<Self, ClusterError> {
        check_frames(x)?;
        if m == 0 {
            return Err(ClusterError::InvalidParams("m must be at least 1"));
        }
        let u = UnitFrames::new(&x.data);
        let rho = density_from(&u, m);
        let delta = peak_distance_from(&u, &rho);
        peak_scores(rho, delta)
    }
}

pub fn peak_scores(rho: Vec<f64>, delta: Vec<f64>) -> Result<PeakScores, ClusterError> {
    if rho.len() != delta.len() {
        return Err(ClusterError::LengthMismatch(rho.len(), delta.len()));
    }
    let s = rho.iter().zip(&delta).map(|(r, d)| r * d).collect();
    Ok(PeakScores { rho, delta, s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: usize,
    pub duration: usize,
    pub seed: usize,
}

impl Cluster {
    pub fn end(&self) -> usize {
        self.start + self.duration
    }
}

/// Temporally ordered, gap-free partition of `[0, total_frames)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub clusters: Vec<Cluster>,
    pub total_frames: usize,
}

impl Segmentation {
    pub fn durations(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.duration).collect()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Checks ordering, tiling, the duration cap and seed placement.
    pub fn check(&self, s_max: usize) -> Result<(), ClusterError> {
        let bad = |msg: String| Err(ClusterError::Inconsistent(msg));
        let mut next = 0;
        for (n, c) in self.clusters.iter().enumerate() {
            if c.start != next {
                return bad(format!(
                    "cluster {n} starts at {} but previous ended at {next}",
                    c.start
                ));
            }
            if c.duration == 0 || c.duration > s_max {
                return bad(format!(
                    "cluster {n} has duration {} outside [1, {s_max}]",
                    c.duration
                ));
            }
            if c.seed < c.start || c.seed >= c.end() {
                return bad(format!("cluster {n} seed {} outside its span", c.seed));
            }
            next = c.end();
        }
        if next != self.total_frames {
            return bad(format!(
                "clusters cover {next} of {} frames",
                self.total_frames
            ));
        }
        Ok(())
    }

    pub fn to_json(&self, params: &ClusterParams) -> serde_json::Value {
        serde_json::json!({
            "total_frames": self.total_frames,
            "params": params,
            "clusters": self.clusters,
        })
    }
}

/// Clusters `x` with scores computed from `x` itself.
pub fn segment(x: &FrameMatrix, p: &ClusterParams) -> Result<Segmentation, ClusterError> {
    p.validate()?;
    let scores = PeakScores::compute(x, p.m)?;
    segment_with_scores(x, &scores, p)
}

/// Greedy growth stage on precomputed scores. `p.m` is ignored here.
pub fn segment_with_scores(
    x: &FrameMatrix,
    scores: &PeakScores,
    p: &ClusterParams,
) -> Result<Segmentation, ClusterError> {
    p.validate()?;
    check_frames(x)?;
    let t = x.frames();
    if scores.len() != t {
        return Err(ClusterError::LengthMismatch(scores.len(), t));
    }
    let u = UnitFrames::new(&x.data);
    let tau = f64::from(p.tau);
    let beta = f64::from(p.beta);
    let mut assigned = vec![false; t];
    let mut clusters = Vec::new();
    let mut remaining = t;

    while remaining > 0 {
        let mut seed = usize::MAX;
        for i in (0..t).filter(|&i| !assigned[i]) {
            if seed == usize::MAX || scores.s[i] > scores.s[seed] {
                seed = i;
            }
        }
        let admits =
            |c: usize, assigned: &[bool]| !assigned[c] && u.phi(seed, c) - beta * scores.s[c] > tau;

        assigned[seed] = true;
        let (mut lo, mut hi) = (seed, seed);
        let (mut forward, mut backward) = (true, true);
        while forward || backward {
            if forward {
                if hi - lo + 1 < p.s_max && hi + 1 < t && admits(hi + 1, &assigned) {
                    hi += 1;
                    assigned[hi] = true;
                } else {
                    forward = false;
                }
            }
            if backward {
                if hi - lo + 1 < p.s_max && lo > 0 && admits(lo - 1, &assigned) {
                    lo -= 1;
                    assigned[lo] = true;
                } else {
                    backward = false;
                }
            }
        }
        let duration = hi - lo + 1;
        remaining -= duration;
        clusters.push(Cluster {
            start: lo,
            duration,
            seed,
        });
    }
    clusters.sort_unstable_by_key(|c| c.start);
    Ok(Segmentation {
        clusters,
        total_frames: t,
    })
}

/// Mean-pools the original frames of each cluster. Returns the `N × H`
/// cluster embeddings and their durations.
pub fn pool(x: &FrameMatrix, seg: &Segmentation) -> Result<(Matrix, Vec<usize>), ClusterError> {
    if seg.total_frames != x.frames() {
        return Err(ClusterError::Inconsistent(format!(
            "segmentation covers {} frames, input has {}",
            seg.total_frames,
            x.frames()
        )));
    }
    seg.check(usize::MAX)?;
    let h = x.dim();
    let mut z = Matrix::zeros(0, h);
    let mut acc = vec![0.0f64; h];
    for c in &seg.clusters {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for t in c.start..c.end() {
            for (a, &v) in acc.iter_mut().zip(x.frame(t)) {
                *a += f64::from(v);
            }
        }
        let n = c.duration as f64;
        let row: Vec<f32> = acc.iter().map(|a| (a / n) as f32).collect();
        z.push_row(&row);
    }
    Ok((z, seg.durations()))
}
