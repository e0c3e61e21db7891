//! Random-projection quantization hashing used to coarsely bucket segments
//! before DTW clustering.
//!
//! Each hash is `floor((t . x + b) / w)` with `x ~ N(0, I)` and
//! `b ~ U[0, w)`. A segment's bucket key is the tuple of all `hash_count`
//! hashes; segments share a bucket only when every hash agrees.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LshError {
    #[error("projection has {expected} dimensions but the segment has {got}")]
    Dim { expected: usize, got: usize },
    #[error("invalid LSH configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LshConfig {
    /// Quantization bucket width `w`.
    pub width: f64,
    /// Number of ANDed hashes `H`.
    pub hash_count: usize,
    pub seed: u64,
}

impl LshConfig {
    pub fn new(width: f64, hash_count: usize, seed: u64) -> Result<Self, LshError> {
        let cfg = Self {
            width,
            hash_count,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LshError> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(LshError::Config(format!("width must be > 0, got {}", self.width)));
        }
        if self.hash_count == 0 {
            return Err(LshError::Config("hash_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Single hash value `floor((t . x + b) / w)`.
pub fn hash_one(t: &[f64], x: &[f64], b: f64, w: f64) -> Result<i64, LshError> {
    if t.len() != x.len() {
        return Err(LshError::Dim {
            expected: x.len(),
            got: t.len(),
        });
    }
    let dot: f64 = t.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(((dot + b) / w).floor() as i64)
}

/// The `H` random `(x, b)` pairs drawn for one interval.
#[derive(Debug, Clone)]
pub struct Projections {
    dim: usize,
    /// `hash_count` rows of `dim` coefficients.
    directions: Vec<f64>,
    offsets: Vec<f64>,
    width: f64,
}

impl Projections {
    /// Draws projections for segments of length `dim`. `stream` separates
    /// independent draws (one per interval) under a single configured seed.
    pub fn draw(cfg: &LshConfig, dim: usize, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let mut directions = Vec::with_capacity(cfg.hash_count * dim);
        let mut offsets = Vec::with_capacity(cfg.hash_count);
        for _ in 0..cfg.hash_count {
            directions.extend((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            offsets.push(rng.random_range(0.0..cfg.width));
        }
        Self {
            dim,
            directions,
            offsets,
            width: cfg.width,
        }
    }

    pub fn hash_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn direction(&self, h: usize) -> &[f64] {
        &self.directions[h * self.dim..(h + 1) * self.dim]
    }

    pub fn offset(&self, h: usize) -> f64 {
        self.offsets[h]
    }

    /// The full bucket key of a segment.
    pub fn key(&self, t: &[f64]) -> Result<Vec<i64>, LshError> {
        (0..self.hash_count())
            .map(|h| hash_one(t, self.direction(h), self.offsets[h], self.width))
            .collect()
    }
}

/// Dense bucket labels for a set of equal-length segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Buckets {
    /// Bucket of each segment, numbered by first appearance.
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Buckets {
    /// Member indices of every bucket, each sorted ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &b) in self.labels.iter().enumerate() {
            out[b as usize].push(i);
        }
        out
    }
}

/// Buckets `segments` (all of one length) by their full hash key.
pub fn bucket<S: AsRef<[f64]>>(
    segments: &[S],
    cfg: &LshConfig,
    stream: u64,
) -> Result<Buckets, LshError> {
    cfg.validate()?;
    let Some(first) = segments.first() else {
        return Ok(Buckets {
            labels: Vec::new(),
            count: 0,
        });
    };
    let proj = Projections::draw(cfg, first.as_ref().len(), stream);
    let mut ids: HashMap<Vec<i64>, u32> = HashMap::new();
    let mut labels = Vec::with_capacity(segments.len());
    for s in segments {
        let key = proj.key(s.as_ref())?;
        let next = ids.len() as u32;
        labels.push(*ids.entry(key).or_insert(next));
    }
    Ok(Buckets {
        count: ids.len(),
        labels,
    })
}
