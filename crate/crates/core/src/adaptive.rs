//! Adaptive interval sizes: exhaustive search over contiguous partitions whose
//! intervals are multiples of the base window, scored by
//! `Q = Q_inter / Q_intra`.
//!
//! * `Q_inter` sums, over group pairs whose ranges intersect, the DTW distance
//!   between their medoids restricted to the shared samples, weighted by
//!   `overlap / max(len_i, len_j)`.
//! * `Q_intra` sums, over groups, the mean member-to-medoid DTW distance
//!   divided by the group's length in samples.
//!
//! Clusterings of identical sample ranges are shared across partitions.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::clustering::{cluster_interval, ClusteringConfig, ClusteringError};
use crate::distance::Dtw;
use crate::extract::{extract_groups_with, CandidateOrder, ExtractError};
use crate::mining::{prefix_scan, MiningError};
use crate::model::{IntervalPartition, PartitionError, SeriesIdx, SubsequenceGroup, SymbolMatrix, TimeSeriesDataset};
use crate::stats::medoid;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdaptiveError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("{n_prime} base windows exceed the limit of {max}; raise the limit to search anyway")]
    TooManyIntervals { n_prime: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum QualityError {
    #[error("quality needs at least two groups, got {0}")]
    Undefined(usize),
}

/// Number of contiguous partitions of `n_prime` base windows.
pub fn partition_count(n_prime: usize) -> u128 {
    if n_prime == 0 {
        0
    } else {
        1u128 << (n_prime - 1)
    }
}

/// Every composition of `n_prime` base windows into contiguous runs, in
/// lexicographic order of run lengths (all-ones first, one run last).
/// `cap` truncates the enumeration.
pub fn enumerate_partitions(
    n_prime: usize,
    base_window: usize,
    cap: Option<usize>,
) -> impl Iterator<Item = IntervalPartition> {
    assert!(n_prime >= 1 && n_prime <= 64, "n_prime must be in 1..=64");
    let bits = n_prime - 1;
    let total = partition_count(n_prime);
    if let Some(c) = cap {
        if (c as u128) < total {
            log::warn!("partition enumeration capped at {c} of {total}");
        }
    }
    // Bit b set (most significant first) means a boundary after window b.
    (0..total)
        .map(move |k| {
            let mask = total - 1 - k;
            let mut runs = Vec::new();
            let mut run = 1;
            for b in 0..bits {
                if mask >> (bits - 1 - b) & 1 == 1 {
                    runs.push(run);
                    run = 1;
                } else {
                    run += 1;
                }
            }
            runs.push(run);
            IntervalPartition::from_runs(base_window, &runs).expect("runs are positive")
        })
        .take(cap.unwrap_or(usize::MAX))
}

/// The two factors of the quality score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityParts {
    pub inter: f64,
    pub intra: f64,
    /// `inter / intra`, or `f64::MAX` when `intra` is zero.
    pub q: f64,
}

impl QualityParts {
    fn new(inter: f64, intra: f64) -> Self {
        let q = if intra == 0.0 { f64::MAX } else { inter / intra };
        Self { inter, intra, q }
    }
}

/// Medoid of a group and its summed member-to-medoid DTW distance.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cohesion {
    medoid: SeriesIdx,
    spread: f64,
}

fn cohesion(ds: &TimeSeriesDataset, members: &[SeriesIdx], range: Range<usize>, metric: Dtw) -> Cohesion {
    let lines: Vec<&[f64]> = members.iter().map(|&i| ds.segment(i, range.clone())).collect();
    let m = medoid(&lines, metric);
    let spread = lines.iter().map(|l| metric.distance(l, lines[m])).sum();
    Cohesion {
        medoid: members[m],
        spread,
    }
}

fn overlap(a: &Range<usize>, b: &Range<usize>) -> Option<Range<usize>> {
    let r = a.start.max(b.start)..a.end.min(b.end);
    (r.start < r.end).then_some(r)
}

fn quality_from(
    ds: &TimeSeriesDataset,
    ranges: &[Range<usize>],
    cohesions: &[Cohesion],
    sizes: &[usize],
    metric: Dtw,
) -> Result<QualityParts, QualityError> {
    let g = ranges.len();
    if g < 2 {
        return Err(QualityError::Undefined(g));
    }
    let mut inter = 0.0;
    for i in 0..g {
        for j in i + 1..g {
            if let Some(o) = overlap(&ranges[i], &ranges[j]) {
                let d = metric.distance(
                    ds.segment(cohesions[i].medoid, o.clone()),
                    ds.segment(cohesions[j].medoid, o.clone()),
                );
                inter += d * o.len() as f64 / ranges[i].len().max(ranges[j].len()) as f64;
            }
        }
    }
    let intra = (0..g)
        .map(|i| cohesions[i].spread / (sizes[i] * ranges[i].len()) as f64)
        .sum();
    Ok(QualityParts::new(inter, intra))
}

/// Quality factors of `groups`, whose interval ranges index `partition`.
pub fn quality_parts(
    groups: &[SubsequenceGroup],
    ds: &TimeSeriesDataset,
    partition: &IntervalPartition,
    metric: Dtw,
) -> Result<QualityParts, QualityError> {
    let ranges: Vec<Range<usize>> = groups
        .iter()
        .map(|g| partition.span(g.interval_range.0, g.interval_range.1))
        .collect();
    let cohesions: Vec<Cohesion> = groups
        .iter()
        .zip(&ranges)
        .map(|(g, r)| cohesion(ds, &g.members, r.clone(), metric))
        .collect();
    let sizes: Vec<usize> = groups.iter().map(SubsequenceGroup::size).collect();
    quality_from(ds, &ranges, &cohesions, &sizes, metric)
}

/// `Q = Q_inter / Q_intra`; higher is better.
pub fn quality(
    groups: &[SubsequenceGroup],
    ds: &TimeSeriesDataset,
    partition: &IntervalPartition,
    metric: Dtw,
) -> Result<f64, QualityError> {
    quality_parts(groups, ds, partition, metric).map(|p| p.q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub clustering: ClusteringConfig,
    pub minsup: usize,
    /// Seed of the greedy extraction.
    pub extract_seed: u64,
    pub order: CandidateOrder,
    /// DTW used for medoids and quality.
    pub metric: Dtw,
    /// Largest base-window count searched without `allow_large`.
    pub max_intervals: usize,
    pub allow_large: bool,
    /// Optional cap on the number of partitions evaluated.
    pub cap: Option<usize>,
    /// Share clusterings and medoids across partitions.
    pub memoize: bool,
}

impl SearchConfig {
    pub fn new(clustering: ClusteringConfig, minsup: usize) -> Self {
        Self {
            clustering,
            minsup,
            extract_seed: clustering.seed,
            order: CandidateOrder::Random,
            metric: clustering.metric(),
            max_intervals: 14,
            allow_large: false,
            cap: None,
            memoize: true,
        }
    }
}

/// Outcome for one evaluated partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub partition: IntervalPartition,
    pub symbols: SymbolMatrix,
    pub groups: Vec<SubsequenceGroup>,
    /// `None` when fewer than two groups make the score undefined.
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: Scored,
    /// `(runs, quality, group count)` of every evaluated partition, in
    /// enumeration order.
    pub evaluated: Vec<(Vec<usize>, Option<f64>, usize)>,
}

type LabelCache = Mutex<HashMap<(usize, usize), Arc<Vec<u32>>>>;
type CohesionCache = Mutex<HashMap<(usize, usize, Vec<SeriesIdx>), Cohesion>>;

struct Memo {
    labels: LabelCache,
    cohesion: CohesionCache,
}

fn interval_labels(
    ds: &TimeSeriesDataset,
    range: Range<usize>,
    cfg: &SearchConfig,
    memo: Option<&Memo>,
) -> Result<Arc<Vec<u32>>, ClusteringError> {
    let key = (range.start, range.end);
    if let Some(m) = memo {
        if let Some(hit) = m.labels.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
    }
    let labels = Arc::new(cluster_interval(ds, range, &cfg.clustering)?.labels);
    if let Some(m) = memo {
        // First writer wins; every writer computes the same labels.
        return Ok(m.labels.lock().expect("cache lock").entry(key).or_insert(labels).clone());
    }
    Ok(labels)
}

fn group_cohesion(
    ds: &TimeSeriesDataset,
    members: &[SeriesIdx],
    range: Range<usize>,
    metric: Dtw,
    memo: Option<&Memo>,
) -> Cohesion {
    let Some(m) = memo else {
        return cohesion(ds, members, range, metric);
    };
    let key = (range.start, range.end, members.to_vec());
    if let Some(hit) = m.cohesion.lock().expect("cache lock").get(&key) {
        return *hit;
    }
    let c = cohesion(ds, members, range, metric);
    *m.cohesion.lock().expect("cache lock").entry(key).or_insert(c)
}

fn evaluate(
    ds: &TimeSeriesDataset,
    partition: IntervalPartition,
    cfg: &SearchConfig,
    memo: Option<&Memo>,
) -> Result<Scored, AdaptiveError> {
    let columns = partition
        .intervals()
        .map(|r| interval_labels(ds, r, cfg, memo).map(|l| l.as_ref().clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let symbols = SymbolMatrix::from_columns(partition.clone(), &columns);
    let profile = prefix_scan(&symbols, cfg.minsup)?;
    let groups = extract_groups_with(&profile, cfg.minsup, cfg.extract_seed, cfg.order)?;
    let ranges: Vec<Range<usize>> = groups
        .iter()
        .map(|g| partition.span(g.interval_range.0, g.interval_range.1))
        .collect();
    let quality = if groups.len() < 2 {
        None
    } else {
        let cohesions: Vec<Cohesion> = groups
            .iter()
            .zip(&ranges)
            .map(|(g, r)| group_cohesion(ds, &g.members, r.clone(), cfg.metric, memo))
            .collect();
        let sizes: Vec<usize> = groups.iter().map(SubsequenceGroup::size).collect();
        quality_from(ds, &ranges, &cohesions, &sizes, cfg.metric).ok().map(|p| p.q)
    };
    Ok(Scored {
        partition,
        symbols,
        groups,
        quality,
    })
}

/// Ranking: higher quality (undefined is worst), then fewer groups, then
/// fewer intervals, then earlier enumeration order.
fn better(a: &Scored, b: &Scored) -> bool {
    let qa = a.quality.unwrap_or(f64::NEG_INFINITY);
    let qb = b.quality.unwrap_or(f64::NEG_INFINITY);
    match qa.total_cmp(&qb) {
        Ordering::Greater => return true,
        Ordering::Less => return false,
        Ordering::Equal => {}
    }
    match a.groups.len().cmp(&b.groups.len()) {
        Ordering::Less => return true,
        Ordering::Greater => return false,
        Ordering::Equal => {}
    }
    a.partition.len() < b.partition.len()
}

/// Evaluates every partition of the series into multiples of `base_window`
/// and returns the best one.
pub fn grid_search(ds: &TimeSeriesDataset, base_window: usize, cfg: &SearchConfig) -> Result<SearchOutcome, AdaptiveError> {
    let uniform = IntervalPartition::uniform(ds.series_len(), base_window)?;
    let n_prime = uniform.len();
    if n_prime > cfg.max_intervals && !cfg.allow_large {
        return Err(AdaptiveError::TooManyIntervals {
            n_prime,
            max: cfg.max_intervals,
        });
    }
    cfg.clustering.validate()?;
    let memo = cfg.memoize.then(|| Memo {
        labels: Mutex::new(HashMap::new()),
        cohesion: Mutex::new(HashMap::new()),
    });
    let partitions: Vec<IntervalPartition> = enumerate_partitions(n_prime, base_window, cfg.cap).collect();
    let scored: Vec<Scored> = partitions
        .into_par_iter()
        .map(|p| evaluate(ds, p, cfg, memo.as_ref()))
        .collect::<Result<_, _>>()?;
    let evaluated = scored
        .iter()
        .map(|s| (s.partition.runs(), s.quality, s.groups.len()))
        .collect();
    let mut best = 0;
    for i in 1..scored.len() {
        if better(&scored[i], &scored[best]) {
            best = i;
        }
    }
    let best = scored.into_iter().nth(best).expect("at least one partition");
    Ok(SearchOutcome { best, evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pattern;

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_partitions(1, 5, None).count(), 1);
        assert_eq!(enumerate_partitions(4, 5, None).count(), 8);
        assert_eq!(enumerate_partitions(10, 5, None).count(), 512);
        for n in 1..=12 {
            let all: Vec<Vec<usize>> = enumerate_partitions(n, 1, None).map(|p| p.runs()).collect();
            assert_eq!(all.len() as u128, partition_count(n));
            let mut sorted = all.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted, all, "distinct and lexicographic for n' = {n}");
            assert!(all.iter().all(|r| r.iter().sum::<usize>() == n));
        }
        assert_eq!(partition_count(20), 1 << 19);
    }

    #[test]
    fn enumeration_order_and_cap() {
        let runs: Vec<Vec<usize>> = enumerate_partitions(3, 2, None).map(|p| p.runs()).collect();
        assert_eq!(runs, vec![vec![1, 1, 1], vec![1, 2], vec![2, 1], vec![3]]);
        let capped: Vec<Vec<usize>> = enumerate_partitions(3, 2, Some(2)).map(|p| p.runs()).collect();
        assert_eq!(capped, runs[..2].to_vec());
        let p = enumerate_partitions(3, 2, None).nth(1).unwrap();
        assert_eq!(p.boundaries(), &[0, 2]);
        assert_eq!(p.series_len(), 6);
    }

    fn flat_ds() -> TimeSeriesDataset {
        let rows = (0..6)
            .map(|i| vec![if i < 3 { 0.0 } else { 10.0 } + 0.1 * (i % 3) as f64; 4])
            .collect();
        TimeSeriesDataset::from_rows(rows).unwrap()
    }

    fn two_groups() -> Vec<SubsequenceGroup> {
        vec![
            SubsequenceGroup::new(Pattern::new(0, vec![0]), vec![0, 1, 2]),
            SubsequenceGroup::new(Pattern::new(0, vec![1]), vec![3, 4, 5]),
        ]
    }

    #[test]
    fn quality_matches_direct_arithmetic() {
        let ds = flat_ds();
        let part = IntervalPartition::uniform(4, 4).unwrap();
        let parts = quality_parts(&two_groups(), &ds, &part, Dtw::full()).unwrap();
        // Medoids are the middle lines (0.1 and 10.1). Flat lines of length 4
        // at distance d have DTW 2d.
        let inter = 2.0 * 10.0 * 4.0 / 4.0;
        let spread = 2.0 * 0.1 + 2.0 * 0.1;
        let intra = 2.0 * spread / (3.0 * 4.0);
        assert!((parts.inter - inter).abs() < 1e-9);
        assert!((parts.intra - intra).abs() < 1e-9);
        assert!((parts.q - inter / intra).abs() < 1e-6);
    }

    #[test]
    fn quality_edge_cases() {
        let ds = flat_ds();
        let part = IntervalPartition::uniform(4, 4).unwrap();
        let one = &two_groups()[..1];
        assert_eq!(quality(one, &ds, &part, Dtw::full()), Err(QualityError::Undefined(1)));

        let g = SubsequenceGroup::new(Pattern::new(0, vec![0]), vec![0]);
        let dup = vec![g.clone(), g];
        let parts = quality_parts(&dup, &ds, &part, Dtw::full()).unwrap();
        assert_eq!(parts.inter, 0.0);
        assert_eq!(parts.q, f64::MAX);
    }

    #[test]
    fn non_overlapping_pairs_do_not_contribute() {
        let ds = flat_ds();
        let part = IntervalPartition::uniform(4, 2).unwrap();
        let groups = vec![
            SubsequenceGroup::new(Pattern::new(0, vec![0]), vec![0, 1]),
            SubsequenceGroup::new(Pattern::new(1, vec![0]), vec![3, 4]),
        ];
        let parts = quality_parts(&groups, &ds, &part, Dtw::full()).unwrap();
        assert_eq!(parts.inter, 0.0);
    }

    #[test]
    fn two_window_search_evaluates_both() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| (0..8).map(|t| if i < 6 { 0.0 } else { t as f64 } + 0.01 * i as f64).collect())
            .collect();
        let ds = TimeSeriesDataset::from_rows(rows).unwrap();
        let mut cfg = SearchConfig::new(
            ClusteringConfig {
                lsh: None,
                ..ClusteringConfig::default()
            },
            3,
        );
        let out = grid_search(&ds, 4, &cfg).unwrap();
        assert_eq!(out.evaluated.len(), 2);
        let best_q = out.evaluated.iter().filter_map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.best.quality, Some(best_q));

        cfg.max_intervals = 1;
        assert!(matches!(grid_search(&ds, 4, &cfg), Err(AdaptiveError::TooManyIntervals { .. })));
    }

    fn stepped_ds() -> TimeSeriesDataset {
        // Three shapes whose differences sit in different halves.
        let rows: Vec<Vec<f64>> = (0..18)
            .map(|i| {
                (0..16)
                    .map(|t| {
                        let base = match i % 3 {
                            0 => 0.0,
                            1 => if t < 8 { 0.0 } else { 4.0 },
                            _ => t as f64 * 0.5,
                        };
                        base + 0.01 * (i / 3) as f64
                    })
                    .collect()
            })
            .collect();
        TimeSeriesDataset::from_rows(rows).unwrap()
    }

    fn direct_search(minsup: usize) -> SearchConfig {
        SearchConfig::new(
            ClusteringConfig {
                lsh: None,
                seed: 4,
                ..ClusteringConfig::default()
            },
            minsup,
        )
    }

    #[test]
    fn memoized_search_equals_uncached_search() {
        let ds = stepped_ds();
        let cached = direct_search(4);
        let plain = SearchConfig {
            memoize: false,
            ..cached.clone()
        };
        assert!(cached.memoize);
        let a = grid_search(&ds, 4, &cached).unwrap();
        let b = grid_search(&ds, 4, &plain).unwrap();
        assert_eq!(a.evaluated.len(), 8);
        assert_eq!(a.best, b.best);
        let bits = |o: &SearchOutcome| -> Vec<(Vec<usize>, Option<u64>, usize)> {
            o.evaluated.iter().map(|(r, q, g)| (r.clone(), q.map(f64::to_bits), *g)).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn scaling_values_keeps_the_best_partition() {
        let ds = stepped_ds();
        // A power of two scales every DTW sum exactly, so medoid ties break
        // the same way on both sides.
        let c = 4.0;
        let scaled = ds.map_values(|v| v * c);
        let cfg = direct_search(4);
        let mut plain_q = Vec::new();
        let mut scaled_q = Vec::new();
        for part in enumerate_partitions(4, 4, None) {
            let sm = crate::clustering::construct_sequences(&ds, &part, &cfg.clustering).unwrap();
            let profile = prefix_scan(&sm, cfg.minsup).unwrap();
            let groups = extract_groups_with(&profile, cfg.minsup, 0, CandidateOrder::Deterministic).unwrap();
            let a = quality_parts(&groups, &ds, &part, Dtw::full());
            let b = quality_parts(&groups, &scaled, &part, Dtw::full());
            if let (Ok(a), Ok(b)) = (&a, &b) {
                assert!((b.inter - c * a.inter).abs() <= 1e-9 * b.inter.max(1.0));
                assert!((b.intra - c * a.intra).abs() <= 1e-9 * b.intra.max(1.0));
            } else {
                assert_eq!(a.is_ok(), b.is_ok());
            }
            plain_q.push(a.map(|p| p.q).ok());
            scaled_q.push(b.map(|p| p.q).ok());
        }
        let argmax = |qs: &[Option<f64>]| {
            let mut best = 0;
            for (i, q) in qs.iter().enumerate() {
                if q.unwrap_or(f64::NEG_INFINITY) > qs[best].unwrap_or(f64::NEG_INFINITY) {
                    best = i;
                }
            }
            best
        };
        assert!(plain_q.iter().any(Option::is_some));
        assert_eq!(argmax(&plain_q), argmax(&scaled_q));
    }
}
