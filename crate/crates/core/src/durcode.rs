//! Implicit duration coding.
//!
//! A codebook index `k ∈ [0, K)` and a duration `d ∈ [1, s_max]` pack into a
//! single token `id = (d − 1)·K + k`, so the token vocabulary is `K·s_max`
//! and no separate duration stream is needed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("codebook index {k} out of range for K = {codebook_size}")]
    IndexOutOfRange { k: u64, codebook_size: u32 },
    #[error("duration {d} out of range [1, {s_max}]")]
    DurationOutOfRange { d: u64, s_max: u32 },
    #[error("token id {id} out of range [0, {vocab})")]
    IdOutOfRange { id: i64, vocab: u64 },
    #[error("invalid coding space: {0}")]
    InvalidSpace(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodingSpace {
    codebook_size: u32,
    s_max: u32,
}

/// `K·s_max` must fit the u32 token width.
const MAX_VOCAB: u64 = 1 << 32;

impl CodingSpace {
    pub fn new(codebook_size: u32, s_max: u32) -> Result<Self, CodeError> {
        if codebook_size == 0 {
            return Err(CodeError::InvalidSpace("K must be at least 1"));
        }
        if s_max == 0 {
            return Err(CodeError::InvalidSpace("s_max must be at least 1"));
        }
        if u64::from(codebook_size) * u64::from(s_max) > MAX_VOCAB {
            return Err(CodeError::InvalidSpace("K·s_max exceeds 2^32"));
        }
        Ok(Self {
            codebook_size,
            s_max,
        })
    }

    pub fn codebook_size(&self) -> u32 {
        self.codebook_size
    }

    pub fn s_max(&self) -> u32 {
        self.s_max
    }

    /// Size of the extended vocabulary, `K·s_max`.
    pub fn vocab_size(&self) -> u64 {
        u64::from(self.codebook_size) * u64::from(self.s_max)
    }

    pub fn encode(&self, k: u32, d: u32) -> Result<ExtendedToken, CodeError> {
        if k >= self.codebook_size {
            return Err(CodeError::IndexOutOfRange {
                k: u64::from(k),
                codebook_size: self.codebook_size,
            });
        }
        if d == 0 || d > self.s_max {
            return Err(CodeError::DurationOutOfRange {
                d: u64::from(d),
                s_max: self.s_max,
            });
        }
        let id = u64::from(d - 1) * u64::from(self.codebook_size) + u64::from(k);
        Ok(ExtendedToken(id as u32))
    }

    /// Validates a raw id (which may be negative or too large).
    pub fn token(&self, id: i64) -> Result<ExtendedToken, CodeError> {
        if id < 0 || id as u64 >= self.vocab_size() {
            return Err(CodeError::IdOutOfRange {
                id,
                vocab: self.vocab_size(),
            });
        }
        Ok(ExtendedToken(id as u32))
    }

    /// Recovers `(k, d)` with `d = ⌊id / K⌋ + 1` and `k = id mod K`.
    pub fn decode(&self, t: ExtendedToken) -> Result<(u32, u32), CodeError> {
        let id = u64::from(t.0);
        if id >= self.vocab_size() {
            return Err(CodeError::IdOutOfRange {
                id: id as i64,
                vocab: self.vocab_size(),
            });
        }
        let k = u64::from(self.codebook_size);
        Ok(((id % k) as u32, (id / k) as u32 + 1))
    }

    pub fn decode_raw(&self, id: i64) -> Result<(u32, u32), CodeError> {
        self.decode(self.token(id)?)
    }
}

/// One token of the extended vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtendedToken(pub u32);

impl ExtendedToken {
    pub fn id(self) -> u32 {
        self.0
    }
}

pub fn encode_id(k: u32, d: u32, space: &CodingSpace) -> Result<ExtendedToken, CodeError> {
    space.encode(k, d)
}

pub fn decode_id(t: ExtendedToken, space: &CodingSpace) -> Result<(u32, u32), CodeError> {
    space.decode(t)
}

pub fn vocab_size(space: &CodingSpace) -> u64 {
    space.vocab_size()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(k: u32, s: u32) -> CodingSpace {
        CodingSpace::new(k, s).unwrap()
    }

    #[test]
    fn encode_examples() {
        let sp = space(4096, 4);
        assert_eq!(encode_id(0, 1, &sp).unwrap().id(), 0);
        assert_eq!(encode_id(4095, 4, &sp).unwrap().id(), 16383);
        assert_eq!(encode_id(7, 2, &sp).unwrap().id(), 4103);
        assert!(matches!(
            sp.encode(4096, 1),
            Err(CodeError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            sp.encode(0, 0),
            Err(CodeError::DurationOutOfRange { .. })
        ));
        assert!(matches!(
            sp.encode(0, 5),
            Err(CodeError::DurationOutOfRange { .. })
        ));
    }

    #[test]
    fn decode_examples() {
        let sp = space(4096, 4);
        assert_eq!(decode_id(ExtendedToken(0), &sp).unwrap(), (0, 1));
        assert_eq!(decode_id(ExtendedToken(16383), &sp).unwrap(), (4095, 4));
        assert!(matches!(
            decode_id(ExtendedToken(16384), &sp),
            Err(CodeError::IdOutOfRange {
                id: 16384,
                vocab: 16384
            })
        ));
        assert!(sp.decode_raw(-1).is_err());
    }

    #[test]
    fn vocab_sizes() {
        assert_eq!(vocab_size(&space(4096, 4)), 16384);
        assert_eq!(vocab_size(&space(2048, 4)), 8192);
        assert_eq!(vocab_size(&space(1, 1)), 1);
    }

    #[test]
    fn space_limits() {
        assert!(CodingSpace::new(0, 4).is_err());
        assert!(CodingSpace::new(4, 0).is_err());
        assert!(CodingSpace::new(1 << 16, 1 << 16).is_ok());
        assert!(CodingSpace::new(u32::MAX, 2).is_err());
        let sp = space(1 << 16, 1 << 16);
        let top = sp.encode((1 << 16) - 1, 1 << 16).unwrap();
        assert_eq!(top.id(), u32::MAX);
        assert_eq!(sp.decode(top).unwrap(), ((1 << 16) - 1, 1 << 16));
    }

    #[test]
    fn durations_occupy_contiguous_ranges() {
        let sp = space(16, 5);
        for id in 0..sp.vocab_size() as i64 {
            let (_, d) = sp.decode_raw(id).unwrap();
            let lo = i64::from(d - 1) * 16;
            assert!(lo <= id && id < lo + 16);
        }
    }

    #[test]
    fn encode_is_monotone() {
        let sp = space(32, 6);
        for k in 0..32 {
            for d in 1..6 {
                assert!(sp.encode(k, d).unwrap() < sp.encode(k, d + 1).unwrap());
            }
        }
        for d in 1..=6 {
            for k in 0..31 {
                assert!(sp.encode(k, d).unwrap() < sp.encode(k + 1, d).unwrap());
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn round_trip(kk in 1u32..5000, s in 1u32..64, k_frac in 0.0f64..1.0, d_frac in 0.0f64..1.0) {
            let sp = space(kk, s);
            let k = ((kk as f64 * k_frac) as u32).min(kk - 1);
            let d = ((s as f64 * d_frac) as u32).min(s - 1) + 1;
            let t = sp.encode(k, d).unwrap();
            proptest::prop_assert!(u64::from(t.id()) < sp.vocab_size());
            proptest::prop_assert_eq!(sp.decode(t).unwrap(), (k, d));
        }
    }
}
