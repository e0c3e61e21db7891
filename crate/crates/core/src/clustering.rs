//! Per-interval DTW clustering: the symbolic representation of every series.
//!
//! Within one interval, segments are bucketed with LSH, a few representatives
//! are drawn from each bucket, and the representatives are clustered with
//! average-linkage agglomeration on DTW distances. The number of clusters is
//! the smallest `k` with `Gap(k) >= Gap(k + 1) / alpha`; when no `k` up to
//! `max_k` satisfies the rule, a single cluster is returned. Labels then flow
//! back from representatives to the rest of their bucket.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::Dtw;
use crate::linkage::Hierarchy;
use crate::lsh::{self, LshConfig, LshError};
use crate::model::{IntervalPartition, SymbolMatrix, TimeSeriesDataset};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusteringError {
    #[error("invalid clustering configuration: {0}")]
    Config(String),
    #[error("partition spans {partition} samples but series have {series}")]
    PartitionMismatch { partition: usize, series: usize },
    #[error(transparent)]
    Lsh(#[from] LshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// Clustering strength; larger values favor fewer clusters.
    pub alpha: f64,
    /// `None` bypasses bucketing: every segment is clustered directly.
    pub lsh: Option<LshConfig>,
    pub samples_per_bucket: usize,
    /// Largest cluster count the gap statistic considers.
    pub max_k: usize,
    /// Reference datasets `B` drawn for the gap statistic.
    pub gap_references: usize,
    pub band_radius: Option<usize>,
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lsh: Some(LshConfig {
                width: 1.0,
                hash_count: 30,
                seed: 0,
            }),
            samples_per_bucket: 1,
            max_k: 16,
            gap_references: 10,
            band_radius: None,
            seed: 0,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<(), ClusteringError> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(ClusteringError::Config(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if self.samples_per_bucket == 0 {
            return Err(ClusteringError::Config(
                "samples_per_bucket must be >= 1".into(),
            ));
        }
        if self.max_k == 0 {
            return Err(ClusteringError::Config("max_k must be >= 1".into()));
        }
        if self.gap_references == 0 {
            return Err(ClusteringError::Config(
                "gap_references must be >= 1".into(),
            ));
        }
        if let Some(l) = &self.lsh {
            l.validate()?;
        }
        Ok(())
    }

    pub fn metric(&self) -> Dtw {
        Dtw {
            band_radius: self.band_radius,
        }
    }
}

/// Result of clustering one set of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct GapClustering {
    /// Dense labels, numbered by first appearance.
    pub labels: Vec<u32>,
    /// Chosen cluster count.
    pub k: usize,
    /// `Gap(k)` for `k = 1..=min(max_k, r)`.
    pub gaps: Vec<f64>,
    /// DTW evaluations between input segments.
    pub dtw_evaluations: usize,
    /// DTW evaluations spent on gap-statistic reference data.
    pub reference_dtw_evaluations: usize,
}

/// Average-linkage DTW clustering with the cluster count chosen by the gap
/// statistic. All segments must have the same length.
pub fn hierarchical_cluster_dtw<S: AsRef<[f64]> + Sync>(
    segments: &[S],
    cfg: &ClusteringConfig,
    seed: u64,
) -> GapClustering {
    let r = segments.len();
    if r <= 1 {
        return GapClustering {
            labels: vec![0; r],
            k: r,
            gaps: Vec::new(),
            dtw_evaluations: 0,
            reference_dtw_evaluations: 0,
        };
    }
    let metric = cfg.metric();
    let costs = pairwise_costs(segments, metric);
    let evaluations = costs.len();
    if costs.iter().all(|&c| c == 0.0) {
        return GapClustering {
            labels: vec![0; r],
            k: 1,
            gaps: Vec::new(),
            dtw_evaluations: evaluations,
            reference_dtw_evaluations: 0,
        };
    }
    let distances: Vec<f64> = costs.iter().map(|c| c.sqrt()).collect();
    let hierarchy = Hierarchy::average(&distances, r);
    let k_max = cfg.max_k.min(r);
    let log_w = log_dispersions(&hierarchy.dispersions(&costs, k_max));

    let (lo, hi) = bounding_box(segments);
    let refs = cfg.gap_references;
    let ref_log_w: Vec<Vec<f64>> = (0..refs)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let reference: Vec<Vec<f64>> = (0..r)
                .map(|_| {
                    lo.iter()
                        .zip(&hi)
                        .map(|(&a, &z)| if z > a { rng.random_range(a..=z) } else { a })
                        .collect()
                })
                .collect();
            let c = pairwise_costs(&reference, metric);
            let d: Vec<f64> = c.iter().map(|x| x.sqrt()).collect();
            let h = Hierarchy::average(&d, r);
            log_dispersions(&h.dispersions(&c, k_max))
        })
        .collect();

    let gaps: Vec<f64> = (0..k_max)
        .map(|k| ref_log_w.iter().map(|w| w[k]).sum::<f64>() / refs as f64 - log_w[k])
        .collect();
    let k = choose_k(&gaps, cfg.alpha);
    GapClustering {
        labels: hierarchy.cut(k),
        k,
        gaps,
        dtw_evaluations: evaluations,
        reference_dtw_evaluations: evaluations * refs,
    }
}

/// Smallest `k` with `Gap(k) >= Gap(k + 1) / alpha`; 1 when none qualifies.
pub fn choose_k(gaps: &[f64], alpha: f64) -> usize {
    gaps.windows(2)
        .position(|g| g[0] >= g[1] / alpha)
        .map_or(1, |i| i + 1)
}

// Logs of pooled dispersions. Zero dispersion (duplicate or singleton
// clusters) is floored relative to W_1 so the log stays finite.
fn log_dispersions(w: &[f64]) -> Vec<f64> {
    let floor = w.first().copied().unwrap_or(0.0) * 1e-12;
    w.iter()
        .map(|&x| x.max(floor).max(f64::MIN_POSITIVE).ln())
        .collect()
}

fn bounding_box<S: AsRef<[f64]>>(segments: &[S]) -> (Vec<f64>, Vec<f64>) {
    let dim = segments[0].as_ref().len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for s in segments {
        let s = s.as_ref();
        assert_eq!(s.len(), dim, "segments of one interval share a length");
        for (d, &v) in s.iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    (lo, hi)
}

/// Condensed matrix of DTW costs (squared distances).
pub(crate) fn pairwise_costs<S: AsRef<[f64]> + Sync>(segments: &[S], metric: Dtw) -> Vec<f64> {
    let n = segments.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let a = segments[i].as_ref();
            (i + 1..n)
                .map(|j| metric.cost(a, segments[j].as_ref()))
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// Clustering of one interval, with instrumentation.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalClustering {
    /// One dense label per series.
    pub labels: Vec<u32>,
    pub k: usize,
    /// LSH buckets (equal to the series count when bucketing is bypassed).
    pub buckets: usize,
    pub representatives: usize,
    pub dtw_evaluations: usize,
    pub reference_dtw_evaluations: usize,
}

/// Stable per-interval key: seeds depend on the interval's sample range only,
/// so overlapping partitions reuse identical clusterings.
fn interval_key(range: &Range<usize>) -> u64 {
    splitmix64((range.start as u64) << 32 ^ range.end as u64)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Clusters the segments of every series over one sample range.
pub fn cluster_interval(
    ds: &TimeSeriesDataset,
    range: Range<usize>,
    cfg: &ClusteringConfig,
) -> Result<IntervalClustering, ClusteringError> {
    cfg.validate()?;
    let key = interval_key(&range);
    let segments: Vec<&[f64]> = (0..ds.len()).map(|i| ds.segment(i, range.clone())).collect();
    let m = segments.len();
    let gap_seed = splitmix64(cfg.seed ^ key);

    let Some(lsh_cfg) = cfg.lsh else {
        let gc = hierarchical_cluster_dtw(&segments, cfg, gap_seed);
        return Ok(IntervalClustering {
            labels: gc.labels,
            k: gc.k,
            buckets: m,
            representatives: m,
            dtw_evaluations: gc.dtw_evaluations,
            reference_dtw_evaluations: gc.reference_dtw_evaluations,
        });
    };

    let buckets = lsh::bucket(&segments, &lsh_cfg, key)?;
    let members = buckets.members();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(key);
    let mut is_rep = vec![false; m];
    for bucket in &members {
        if bucket.len() <= cfg.samples_per_bucket {
            bucket.iter().for_each(|&i| is_rep[i] = true);
        } else {
            for pick in rand::seq::index::sample(&mut rng, bucket.len(), cfg.samples_per_bucket) {
                is_rep[bucket[pick]] = true;
            }
        }
    }
    let reps: Vec<usize> = (0..m).filter(|&i| is_rep[i]).collect();
    let rep_segments: Vec<&[f64]> = reps.iter().map(|&i| segments[i]).collect();
    let gc = hierarchical_cluster_dtw(&rep_segments, cfg, gap_seed);

    let mut raw = vec![u32::MAX; m];
    for (&i, &l) in reps.iter().zip(&gc.labels) {
        raw[i] = l;
    }
    // Non-representatives take the majority label of their bucket's
    // representatives; ties go to the lowest label.
    let k_reps = gc.k.max(1);
    for bucket in &members {
        let mut votes = vec![0usize; k_reps];
        for &i in bucket {
            if is_rep[i] {
                votes[raw[i] as usize] += 1;
            }
        }
        let (winner, _) = votes
            .iter()
            .enumerate()
            .fold((0, 0), |best, (l, &c)| if c > best.1 { (l, c) } else { best });
        for &i in bucket {
            if !is_rep[i] {
                raw[i] = winner as u32;
            }
        }
    }
    let labels = compact_labels(&raw);
    let k = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    Ok(IntervalClustering {
        labels,
        k,
        buckets: buckets.count,
        representatives: reps.len(),
        dtw_evaluations: gc.dtw_evaluations,
        reference_dtw_evaluations: gc.reference_dtw_evaluations,
    })
}

/// Renumbers labels densely in order of first appearance.
pub(crate) fn compact_labels(raw: &[u32]) -> Vec<u32> {
    let mut map = std::collections::HashMap::new();
    raw.iter()
        .map(|l| {
            let next = map.len() as u32;
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Builds the symbol matrix: one clustering per interval of `partition`.
pub fn construct_sequences(
    ds: &TimeSeriesDataset,
    partition: &IntervalPartition,
    cfg: &ClusteringConfig,
) -> Result<SymbolMatrix, ClusteringError> {
    let columns = cluster_all_intervals(ds, partition, cfg)?
        .into_iter()
        .map(|c| c.labels)
        .collect::<Vec<_>>();
    Ok(SymbolMatrix::from_columns(partition.clone(), &columns))
}

/// Like [`construct_sequences`] but keeps the per-interval instrumentation.
pub fn cluster_all_intervals(
    ds: &TimeSeriesDataset,
    partition: &IntervalPartition,
    cfg: &ClusteringConfig,
) -> Result<Vec<IntervalClustering>, ClusteringError> {
    cfg.validate()?;
    if partition.series_len() != ds.series_len() {
        return Err(ClusteringError::PartitionMismatch {
            partition: partition.series_len(),
            series: ds.series_len(),
        });
    }
    let ranges: Vec<Range<usize>> = partition.intervals().collect();
    ranges
        .into_par_iter()
        .map(|r| cluster_interval(ds, r, cfg))
        .collect()
}
