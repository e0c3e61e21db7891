//! Domain types shared by every pipeline stage.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;

/// Index of a series (a row) inside a [`TimeSeriesDataset`].
pub type SeriesIdx = usize;

/// A collection of `m` regularly sampled series of common length `n`.
///
/// Values are stored row-major. Every row shares `time_axis`, which is
/// strictly increasing and uniformly spaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    values: Vec<f64>,
    series_ids: Vec<String>,
    time_axis: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attributes: Option<BTreeMap<String, String>>,
}

impl TimeSeriesDataset {
    /// Builds a dataset from rows, checking shape, finiteness and the time axis.
    pub fn new(
        series_ids: Vec<String>,
        time_axis: Vec<f64>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, IngestError> {
        if rows.is_empty() {
            return Err(IngestError::Empty);
        }
        if series_ids.len() != rows.len() {
            return Err(IngestError::Shape(format!(
                "{} ids for {} rows",
                series_ids.len(),
                rows.len()
            )));
        }
        let n = time_axis.len();
        if n == 0 {
            return Err(IngestError::Empty);
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(IngestError::RaggedLengths);
        }
        check_uniform_axis(&time_axis)?;
        let mut values = Vec::with_capacity(rows.len() * n);
        for (r, row) in rows.iter().enumerate() {
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(IngestError::NonFinite { row: r, col: c });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            values,
            series_ids,
            time_axis,
            attributes: None,
        })
    }

    /// Convenience constructor with index ids and an index time axis.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, IngestError> {
        let n = rows.first().map_or(0, Vec::len);
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        let axis = (0..n).map(|i| i as f64).collect();
        Self::new(ids, axis, rows)
    }

    pub fn with_attributes(mut self, attributes: BTreeMap<String, String>) -> Self {
        self.attributes = Some(attributes);
        self
    }

    /// Number of series `m`.
    pub fn len(&self) -> usize {
        self.series_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series_ids.is_empty()
    }

    /// Number of samples per series `n`.
    pub fn series_len(&self) -> usize {
        self.time_axis.len()
    }

    pub fn row(&self, i: SeriesIdx) -> &[f64] {
        let n = self.series_len();
        &self.values[i * n..(i + 1) * n]
    }

    /// The samples of series `i` inside `range`.
    pub fn segment(&self, i: SeriesIdx, range: Range<usize>) -> &[f64] {
        &self.row(i)[range]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.series_len())
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn time_axis(&self) -> &[f64] {
        &self.time_axis
    }

    pub fn attributes(&self) -> Option<&BTreeMap<String, String>> {
        self.attributes.as_ref()
    }

    pub fn position_of(&self, series_id: &str) -> Option<SeriesIdx> {
        self.series_ids.iter().position(|s| s == series_id)
    }

    /// Applies `f` to every value, keeping ids and the time axis.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn rows_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        let n = self.series_len();
        self.values.chunks_exact_mut(n)
    }
}

fn check_uniform_axis(axis: &[f64]) -> Result<(), IngestError> {
    if axis.iter().any(|t| !t.is_finite()) {
        return Err(IngestError::IrregularSampling);
    }
    if axis.len() < 2 {
        return Ok(());
    }
    let step = axis[1] - axis[0];
    if step <= 0.0 {
        return Err(IngestError::IrregularSampling);
    }
    let span = (axis[axis.len() - 1] - axis[0]).abs().max(1.0);
    let tol = 1e-9 * span;
    for (i, w) in axis.windows(2).enumerate() {
        let d = w[1] - w[0];
        if d <= 0.0 || (d - step).abs() > tol {
            log::debug!("non-uniform time axis at sample {i}");
            return Err(IngestError::IrregularSampling);
        }
    }
    Ok(())
}

/// Contiguous split of `[0, n)` into intervals whose lengths are multiples of
/// a base window `l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntervalPartition {
    boundaries: Vec<usize>,
    base_window: usize,
    series_len: usize,
}

/// Errors raised when an interval partition is malformed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("base window must be at least 1")]
    ZeroWindow,
    #[error("window size {window} does not divide series length {series_len}")]
    NotDivisible { window: usize, series_len: usize },
    #[error("interval lengths must be positive")]
    EmptyRun,
}

impl IntervalPartition {
    /// Uniform partition into `n / l` intervals of `l` samples each.
    pub fn uniform(series_len: usize, base_window: usize) -> Result<Self, PartitionError> {
        if base_window == 0 {
            return Err(PartitionError::ZeroWindow);
        }
        if series_len == 0 || series_len % base_window != 0 {
            return Err(PartitionError::NotDivisible {
                window: base_window,
                series_len,
            });
        }
        let runs = vec![1; series_len / base_window];
        Self::from_runs(base_window, &runs)
    }

    /// Builds a partition from run lengths expressed in base windows.
    pub fn from_runs(base_window: usize, runs: &[usize]) -> Result<Self, PartitionError> {
        if base_window == 0 {
            return Err(PartitionError::ZeroWindow);
        }
        if runs.is_empty() || runs.contains(&0) {
            return Err(PartitionError::EmptyRun);
        }
        let mut boundaries = Vec::with_capacity(runs.len());
        let mut start = 0;
        for &r in runs {
            boundaries.push(start);
            start += r * base_window;
        }
        Ok(Self {
            boundaries,
            base_window,
            series_len: start,
        })
    }

    /// Interval start indices (in samples); the first is always 0.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn base_window(&self) -> usize {
        self.base_window
    }

    pub fn series_len(&self) -> usize {
        self.series_len
    }

    /// Number of intervals `n'`.
    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    /// Sample range of interval `i`.
    pub fn interval(&self, i: usize) -> Range<usize> {
        let end = self
            .boundaries
            .get(i + 1)
            .copied()
            .unwrap_or(self.series_len);
        self.boundaries[i]..end
    }

    /// Sample range covered by intervals `first..=last`.
    pub fn span(&self, first: usize, last: usize) -> Range<usize> {
        self.interval(first).start..self.interval(last).end
    }

    pub fn intervals(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.len()).map(|i| self.interval(i))
    }

    /// Interval lengths in base windows.
    pub fn runs(&self) -> Vec<usize> {
        self.intervals()
            .map(|r| r.len() / self.base_window)
            .collect()
    }
}

/// Per-interval cluster labels: the symbolic representation of every series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolMatrix {
    labels: Vec<u32>,
    rows: usize,
    partition: IntervalPartition,
    cluster_counts: Vec<u32>,
}

impl SymbolMatrix {
    /// Builds a matrix from per-interval label columns. Each column must be
    /// gapless: its labels span `0..k` for some `k`.
    pub fn from_columns(partition: IntervalPartition, columns: &[Vec<u32>]) -> Self {
        assert_eq!(columns.len(), partition.len(), "one column per interval");
        let rows = columns.first().map_or(0, Vec::len);
        let cols = columns.len();
        let mut labels = vec![0u32; rows * cols];
        let mut cluster_counts = Vec::with_capacity(cols);
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged symbol columns");
            let k = col.iter().map(|&l| l + 1).max().unwrap_or(0);
            cluster_counts.push(k);
            for (r, &l) in col.iter().enumerate() {
                labels[r * cols + c] = l;
            }
        }
        Self {
            labels,
            rows,
            partition,
            cluster_counts,
        }
    }

    /// Builds a matrix from rows of labels on a uniform partition with
    /// unit base window. Convenient for mining-only workloads.
    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let columns: Vec<Vec<u32>> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c]).collect())
            .collect();
        let partition = if cols == 0 {
            IntervalPartition {
                boundaries: Vec::new(),
                base_window: 1,
                series_len: 0,
            }
        } else {
            IntervalPartition::uniform(cols, 1).expect("unit windows always divide")
        };
        let mut sm = Self::from_columns(partition, &columns);
        if cols == 0 {
            sm.rows = rows.len();
        }
        sm
    }

    /// Number of series `m`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of intervals `n'`.
    pub fn cols(&self) -> usize {
        self.cluster_counts.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        let c = self.cols();
        &self.labels[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn partition(&self) -> &IntervalPartition {
        &self.partition
    }

    /// Number of clusters `k_i` per interval.
    pub fn cluster_counts(&self) -> &[u32] {
        &self.cluster_counts
    }
}

/// A run of contiguous symbols starting at a given interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern {
    pub start_interval: usize,
    pub symbols: Vec<u32>,
}

impl Pattern {
    pub fn new(start_interval: usize, symbols: Vec<u32>) -> Self {
        assert!(!symbols.is_empty(), "patterns hold at least one symbol");
        Self {
            start_interval,
            symbols,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Last interval covered (inclusive).
    pub fn end_interval(&self) -> usize {
        self.start_interval + self.symbols.len() - 1
    }

    /// Whether the interval ranges of the two patterns share an interval.
    pub fn overlaps(&self, other: &Pattern) -> bool {
        self.start_interval <= other.end_interval() && other.start_interval <= self.end_interval()
    }

    /// Whether series `row` of `sm` carries this pattern.
    pub fn matches(&self, sm: &SymbolMatrix, row: usize) -> bool {
        self.symbols
            .iter()
            .enumerate()
            .all(|(o, &s)| sm.get(row, self.start_interval + o) == s)
    }
}

/// Frequent patterns mapped to their sorted supporter sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternProfile {
    entries: BTreeMap<Pattern, Vec<SeriesIdx>>,
}

impl PatternProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a pattern. Supporters are sorted and deduplicated.
    pub fn insert(&mut self, pattern: Pattern, mut supporters: Vec<SeriesIdx>) {
        supporters.sort_unstable();
        supporters.dedup();
        self.entries.insert(pattern, supporters);
    }

    pub fn get(&self, pattern: &Pattern) -> Option<&[SeriesIdx]> {
        self.entries.get(pattern).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Pattern, &[SeriesIdx])> {
        self.entries.iter().map(|(p, s)| (p, s.as_slice()))
    }

    pub fn patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.entries.keys()
    }

    pub(crate) fn from_entries(entries: BTreeMap<Pattern, Vec<SeriesIdx>>) -> Self {
        Self { entries }
    }
}

/// A set of series bound to a contiguous interval range; rendered as one chart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsequenceGroup {
    pub pattern: Pattern,
    /// Sorted series indices.
    pub members: Vec<SeriesIdx>,
    /// Inclusive `(start_interval, end_interval)`.
    pub interval_range: (usize, usize),
}

impl SubsequenceGroup {
    pub fn new(pattern: Pattern, mut members: Vec<SeriesIdx>) -> Self {
        members.sort_unstable();
        let interval_range = (pattern.start_interval, pattern.end_interval());
        Self {
            pattern,
            members,
            interval_range,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn overlaps_range(&self, other: &SubsequenceGroup) -> bool {
        self.interval_range.0 <= other.interval_range.1
            && other.interval_range.0 <= self.interval_range.1
    }

    /// Number of (series, interval) cells covered.
    pub fn cells(&self) -> usize {
        self.members.len() * (self.interval_range.1 - self.interval_range.0 + 1)
    }
}

/// Per-timestep envelope: `lo[t] <= hi[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Fixed-resolution 2-D histogram of a group's polylines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major counts; row 0 is the lowest value band.
    pub counts: Vec<u32>,
    pub t_min: f64,
    pub t_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl DensityGrid {
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Render statistics for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    /// Series index of the medoid (the chart's centerline).
    pub medoid_index: SeriesIdx,
    pub band_full: Band,
    pub band_q90: Band,
    pub density: DensityGrid,
    pub size: usize,
}

/// Every knob that influences a summary. Missing fields deserialize to
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryParams {
    /// Base window `l` in samples.
    pub window_size: usize,
    /// Clustering strength.
    pub alpha: f64,
    pub minsup: usize,
    pub lsh_width: f64,
    pub lsh_hashes: usize,
    pub samples_per_bucket: usize,
    pub seed: u64,
    /// Use LSH bucketing before DTW clustering.
    pub use_lsh: bool,
    pub max_k: usize,
    pub gap_references: usize,
    /// Sakoe-Chiba radius for clustering DTW; `None` is unconstrained.
    pub band_radius: Option<usize>,
    pub adaptive: bool,
    /// Largest interval count the adaptive search accepts.
    pub max_intervals: usize,
    pub density_rows: usize,
    pub density_max_cols: usize,
    /// How the greedy extraction picks among equally long candidates.
    pub candidate_order: crate::extract::CandidateOrder,
}

impl Default for SummaryParams {
    fn default() -> Self {
        Self {
            window_size: 25,
            alpha: 1.0,
            minsup: 50,
            lsh_width: 1.0,
            lsh_hashes: 30,
            samples_per_bucket: 1,
            seed: 0,
            use_lsh: true,
            max_k: 16,
            gap_references: 10,
            band_radius: None,
            adaptive: false,
            max_intervals: 14,
            density_rows: 64,
            density_max_cols: 512,
            candidate_order: crate::extract::CandidateOrder::Random,
        }
    }
}

/// All extracted groups plus render-ready statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryArtifact {
    pub groups: Vec<SubsequenceGroup>,
    pub stats: Vec<GroupStats>,
    /// Display order: a permutation of group indices.
    pub ordering: Vec<usize>,
    /// Fraction of (series, interval) cells covered by `groups`.
    pub coverage: f64,
    pub partition: IntervalPartition,
    pub params: SummaryParams,
    /// Adaptive search score of the chosen partition, when one was run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
}

impl SummaryArtifact {
    /// Sample range covered by group `g`.
    pub fn sample_range(&self, g: usize) -> Range<usize> {
        let (a, b) = self.groups[g].interval_range;
        self.partition.span(a, b)
    }
}
