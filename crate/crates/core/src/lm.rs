//! Add-α n-gram model over extended token IDs.
//!
//! Each sequence is padded with `order − 1` begin markers and terminated by
//! an end marker. The model predicts over `K·s_max` content IDs plus the end
//! marker, so its outcome vocabulary is `K·s_max + 1`.

use crate::durcode::CodingSpace;
use crate::stream::TokenStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LmError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid model settings: {0}")]
    InvalidConfig(&'static str),
    #[error("stream coding space differs from the model's")]
    SpaceMismatch,
    #[error("token id {0} outside the model vocabulary")]
    InvalidId(u32),
    #[error("model table parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

const BOS: &str = "<s>";
const EOS: &str = "</s>";

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    space: CodingSpace,
    counts: BTreeMap<Vec<u32>, BTreeMap<u32, u64>>,
    totals: BTreeMap<Vec<u32>, u64>,
}

impl NGramModel {
    /// Untrained model: every outcome equally likely.
    pub fn empty(space: CodingSpace, order: usize, alpha: f64) -> Result<Self, LmError> {
        if order == 0 {
            return Err(LmError::InvalidConfig("order must be at least 1"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LmError::InvalidConfig("alpha must be positive"));
        }
        if space.vocab_size() + 2 > u64::from(u32::MAX) {
            return Err(LmError::InvalidConfig(
                "vocabulary too large for marker ids",
            ));
        }
        Ok(Self {
            order,
            alpha,
            space,
            counts: BTreeMap::new(),
            totals: BTreeMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn space(&self) -> CodingSpace {
        self.space
    }

    fn content_vocab(&self) -> u32 {
        self.space.vocab_size() as u32
    }

    fn eos(&self) -> u32 {
        self.content_vocab()
    }

    fn bos(&self) -> u32 {
        self.content_vocab() + 1
    }

    /// Outcome vocabulary size: content IDs plus the end marker.
    pub fn vocab_size(&self) -> u64 {
        self.space.vocab_size() + 1
    }

    pub fn count(&self, context: &[u32], next: u32) -> u64 {
        self.counts
            .get(context)
            .and_then(|m| m.get(&next))
            .copied()
            .unwrap_or(0)
    }

    pub fn context_total(&self, context: &[u32]) -> u64 {
        self.totals.get(context).copied().unwrap_or(0)
    }

    /// Smoothed `P(next | context)`; `next` may be the end marker
    /// (`K·s_max`).
    pub fn prob(&self, context: &[u32], next: u32) -> f64 {
        (self.count(context, next) as f64 + self.alpha)
            / (self.context_total(context) as f64 + self.alpha * self.vocab_size() as f64)
    }

    fn padded(&self, ids: &[u32]) -> Vec<u32> {
        let mut seq = vec![self.bos(); self.order - 1];
        seq.extend_from_slice(ids);
        seq.push(self.eos());
        seq
    }

    fn observe(&mut self, ids: &[u32]) {
        let seq = self.padded(ids);
        let n = self.order;
        for i in (n - 1)..seq.len() {
            let ctx = seq[i + 1 - n..i].to_vec();
            *self
                .counts
                .entry(ctx.clone())
                .or_default()
                .entry(seq[i])
                .or_default() += 1;
            *self.totals.entry(ctx).or_default() += 1;
        }
    }

    fn check_ids(&self, ids: &[u32]) -> Result<(), LmError> {
        match ids.iter().find(|&&id| id >= self.content_vocab()) {
            Some(&bad) => Err(LmError::InvalidId(bad)),
            None => Ok(()),
        }
    }

    /// Perplexity of a raw ID sequence, including the end marker.
    pub fn perplexity_ids(&self, ids: &[u32]) -> Result<f64, LmError> {
        self.check_ids(ids)?;
        let seq = self.padded(ids);
        let n = self.order;
        let mut nll = 0.0;
        let mut steps = 0usize;
        for i in (n - 1)..seq.len() {
            nll -= self.prob(&seq[i + 1 - n..i], seq[i]).ln();
            steps += 1;
        }
        Ok((nll / steps as f64).exp())
    }

    /// Sorted `context \t next \t count` table, one n-gram per line.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "# ngram order={} alpha={} codebook_size={} s_max={}\n",
            self.order,
            self.alpha,
            self.space.codebook_size(),
            self.space.s_max()
        );
        for (ctx, nexts) in &self.counts {
            let ctx_str: Vec<String> = ctx.iter().map(|&c| self.symbol(c)).collect();
            for (&next, &c) in nexts {
                let _ = writeln!(out, "{}\t{}\t{}", ctx_str.join(" "), self.symbol(next), c);
            }
        }
        out
    }

    fn symbol(&self, id: u32) -> String {
        if id == self.bos() {
            BOS.to_string()
        } else if id == self.eos() {
            EOS.to_string()
        } else {
            id.to_string()
        }
    }

    pub fn from_table(text: &str) -> Result<Self, LmError> {
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, msg: &str| LmError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
        let mut fields = BTreeMap::new();
        for kv in header.trim_start_matches("# ngram").split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(0, "bad header field"))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| parse_err(0, "missing header field"))
        };
        let order: usize = get("order")?
            .parse()
            .map_err(|_| parse_err(0, "bad order"))?;
        let alpha: f64 = get("alpha")?
            .parse()
            .map_err(|_| parse_err(0, "bad alpha"))?;
        let k: u32 = get("codebook_size")?
            .parse()
            .map_err(|_| parse_err(0, "bad codebook_size"))?;
        let s: u32 = get("s_max")?
            .parse()
            .map_err(|_| parse_err(0, "bad s_max"))?;
        let space = CodingSpace::new(k, s).map_err(|_| parse_err(0, "bad coding space"))?;
        let mut model = Self::empty(space, order, alpha)?;
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(parse_err(ln, "expected three tab-separated fields"));
            }
            let sym = |s: &str| -> Result<u32, LmError> {
                match s {
                    BOS => Ok(model.bos()),
                    EOS => Ok(model.eos()),
                    _ => s.parse().map_err(|_| parse_err(ln, "bad symbol")),
                }
            };
            let ctx = parts[0]
                .split_whitespace()
                .map(sym)
                .collect::<Result<Vec<_>, _>>()?;
            if ctx.len() != order - 1 {
                return Err(parse_err(ln, "context length does not match order"));
            }
            let next = sym(parts[1])?;
            let c: u64 = parts[2].parse().map_err(|_| parse_err(ln, "bad count"))?;
            *model
                .counts
                .entry(ctx.clone())
                .or_default()
                .entry(next)
                .or_default() += c;
            *model.totals.entry(ctx).or_default() += c;
        }
        Ok(model)
    }
}

/// Tallies n-grams over every stream. All streams must share one coding
/// space.
pub fn fit_ngram(streams: &[TokenStream], order: usize, alpha: f64) -> Result<NGramModel, LmError> {
    let first = streams.first().ok_or(LmError::EmptyCorpus)?;
    let mut model = NGramModel::empty(first.space, order, alpha)?;
    for s in streams {
        if s.space != model.space {
            return Err(LmError::SpaceMismatch);
        }
        let ids: Vec<u32> = s.tokens.iter().map(|t| t.id()).collect();
        model.check_ids(&ids)?;
        model.observe(&ids);
    }
    Ok(model)
}

/// Fits directly on ID sequences.
pub fn fit_ngram_ids(
    space: CodingSpace,
    sequences: &[Vec<u32>],
    order: usize,
    alpha: f64,
) -> Result<NGramModel, LmError> {
    if sequences.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut model = NGramModel::empty(space, order, alpha)?;
    for s in sequences {
        model.check_ids(s)?;
        model.observe(s);
    }
    Ok(model)
}

pub fn perplexity(model: &NGramModel, stream: &TokenStream) -> Result<f64, LmError> {
    if stream.space != model.space {
        return Err(LmError::SpaceMismatch);
    }
    let ids: Vec<u32> = stream.tokens.iter().map(|t| t.id()).collect();
    model.perplexity_ids(&ids)
}

/// Ancestral sampling of `length` content tokens after `prompt`. The end
/// marker is excluded, so exactly `length` IDs come back.
pub fn generate(
    model: &NGramModel,
    prompt: &[u32],
    length: usize,
    seed: u64,
) -> Result<Vec<u32>, LmError> {
    model.check_ids(prompt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.order;
    let mut history = vec![model.bos(); n - 1];
    history.extend_from_slice(prompt);
    let vocab = model.content_vocab();
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        let ctx = &history[history.len() + 1 - n..];
        let seen = model.counts.get(ctx);
        let content_total = model.context_total(ctx) - model.count(ctx, model.eos());
        let smooth_mass = model.alpha * f64::from(vocab);
        let mut u = rng.random::<f64>() * (content_total as f64 + smooth_mass);
        let mut pick = None;
        if let Some(seen) = seen {
            for (&next, &c) in seen.iter().filter(|(&next, _)| next < vocab) {
                if u < c as f64 {
                    pick = Some(next);
                    break;
                }
                u -= c as f64;
            }
        }
        let next = match pick {
            Some(p) => p,
            None => ((u.max(0.0) / model.alpha) as u64).min(u64::from(vocab) - 1) as u32,
        };
        out.push(next);
        history.push(next);
    }
    Ok(out)
}
