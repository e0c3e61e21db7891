//! End-to-end summarization: symbols, patterns, groups, render statistics.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{grid_search, AdaptiveError, SearchConfig};
use crate::clustering::{construct_sequences, splitmix64, ClusteringConfig, ClusteringError};
use crate::distance::Dtw;
use crate::extract::{check_disjoint, extract_groups_with, ExtractError};
use crate::lsh::LshConfig;
use crate::mining::{prefix_scan, MiningError};
use crate::model::{
    IntervalPartition, PartitionError, SubsequenceGroup, SummaryArtifact, SummaryParams, SymbolMatrix,
    TimeSeriesDataset,
};
use crate::stats::{group_stats, order_groups};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid parameter: {0}")]
    Validation(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),
}

impl PipelineError {
    /// Whether the error stems from user-supplied parameters.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PipelineError::Validation(_)
                | PipelineError::Partition(_)
                | PipelineError::Clustering(ClusteringError::Config(_))
                | PipelineError::Clustering(ClusteringError::Lsh(_))
                | PipelineError::Adaptive(AdaptiveError::TooManyIntervals { .. })
                | PipelineError::Adaptive(AdaptiveError::Partition(_))
        )
    }
}

/// Wall-clock time per stage. Never part of the artifact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub clustering: Duration,
    pub mining: Duration,
    pub extraction: Duration,
    pub stats: Duration,
    /// Whole adaptive search, when one ran (includes the three stages above).
    pub search: Duration,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub artifact: SummaryArtifact,
    pub symbols: SymbolMatrix,
    pub timings: StageTimings,
}

pub fn clustering_config(params: &SummaryParams) -> ClusteringConfig {
    ClusteringConfig {
        alpha: params.alpha,
        lsh: params.use_lsh.then_some(LshConfig {
            width: params.lsh_width,
            hash_count: params.lsh_hashes,
            seed: params.seed,
        }),
        samples_per_bucket: params.samples_per_bucket,
        max_k: params.max_k,
        gap_references: params.gap_references,
        band_radius: params.band_radius,
        seed: params.seed,
    }
}

/// Checks parameters against each other and against the dataset.
pub fn validate(params: &SummaryParams, ds: &TimeSeriesDataset) -> Result<(), PipelineError> {
    let bad = |m: String| Err(PipelineError::Validation(m));
    if params.minsup < 1 {
        return bad("minsup must be >= 1".into());
    }
    if params.window_size == 0 {
        return bad("window size must be >= 1".into());
    }
    if ds.series_len() % params.window_size != 0 {
        return bad(format!(
            "window size {} does not divide series length {}",
            params.window_size,
            ds.series_len()
        ));
    }
    if params.density_rows == 0 || params.density_max_cols == 0 {
        return bad("density grid dimensions must be >= 1".into());
    }
    clustering_config(params).validate()?;
    Ok(())
}

fn extract_seed(params: &SummaryParams) -> u64 {
    params.seed
}

fn ordering_seed(params: &SummaryParams) -> u64 {
    splitmix64(params.seed ^ 0x6f72_6465_72)
}

pub fn summarize(ds: &TimeSeriesDataset, params: &SummaryParams) -> Result<SummaryArtifact, PipelineError> {
    run(ds, params).map(|r| r.artifact)
}

/// Runs the full pipeline, including the adaptive search when requested.
pub fn run(ds: &TimeSeriesDataset, params: &SummaryParams) -> Result<PipelineRun, PipelineError> {
    validate(params, ds)?;
    let mut timings = StageTimings::default();
    let cfg = clustering_config(params);

    let (partition, symbols, groups, quality) = if params.adaptive {
        let t = Instant::now();
        let mut search = SearchConfig::new(cfg, params.minsup);
        search.extract_seed = extract_seed(params);
        search.order = params.candidate_order;
        search.max_intervals = params.max_intervals;
        let out = grid_search(ds, params.window_size, &search)?;
        timings.search = t.elapsed();
        (out.best.partition, out.best.symbols, out.best.groups, out.best.quality)
    } else {
        let partition = IntervalPartition::uniform(ds.series_len(), params.window_size)?;
        let t = Instant::now();
        let symbols = construct_sequences(ds, &partition, &cfg)?;
        timings.clustering = t.elapsed();
        let t = Instant::now();
        let profile = prefix_scan(&symbols, params.minsup)?;
        timings.mining = t.elapsed();
        let t = Instant::now();
        let groups = extract_groups_with(&profile, params.minsup, extract_seed(params), params.candidate_order)?;
        timings.extraction = t.elapsed();
        (partition, symbols, groups, None)
    };

    let t = Instant::now();
    let artifact = build_artifact(ds, partition, groups, params, quality)?;
    timings.stats = t.elapsed();
    Ok(PipelineRun {
        artifact,
        symbols,
        timings,
    })
}

/// Attaches statistics, ordering and coverage to extracted groups.
pub fn build_artifact(
    ds: &TimeSeriesDataset,
    partition: IntervalPartition,
    groups: Vec<SubsequenceGroup>,
    params: &SummaryParams,
    quality: Option<f64>,
) -> Result<SummaryArtifact, PipelineError> {
    let metric = Dtw {
        band_radius: params.band_radius,
    };
    let covered = check_disjoint(&groups, ds.len(), partition.len())?;
    let total = ds.len() * partition.len();
    let coverage = if total == 0 { 0.0 } else { covered as f64 / total as f64 };
    let stats = groups
        .par_iter()
        .map(|g| group_stats(g, ds, &partition, metric, params.density_rows, params.density_max_cols))
        .collect();
    let ordering = order_groups(&groups, ds, &partition, ordering_seed(params), metric);
    Ok(SummaryArtifact {
        groups,
        stats,
        ordering,
        coverage,
        partition,
        params: params.clone(),
        quality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_shapes() -> TimeSeriesDataset {
        let rows = (0..8)
            .map(|i| (0..20).map(|t| if i < 4 { 0.0 } else { t as f64 }).collect())
            .collect();
        TimeSeriesDataset::from_rows(rows).unwrap()
    }

    #[test]
    fn validation_errors() {
        let ds = two_shapes();
        let p = SummaryParams {
            window_size: 7,
            ..SummaryParams::default()
        };
        assert!(validate(&p, &ds).unwrap_err().is_validation());
        let p = SummaryParams {
            minsup: 0,
            window_size: 10,
            ..SummaryParams::default()
        };
        assert!(validate(&p, &ds).unwrap_err().is_validation());
        let p = SummaryParams {
            alpha: -1.0,
            window_size: 10,
            ..SummaryParams::default()
        };
        assert!(validate(&p, &ds).unwrap_err().is_validation());
    }

    #[test]
    fn minsup_above_m_gives_empty_summary() {
        let ds = two_shapes();
        let p = SummaryParams {
            window_size: 10,
            minsup: 9,
            ..SummaryParams::default()
        };
        let a = summarize(&ds, &p).unwrap();
        assert!(a.groups.is_empty());
        assert_eq!(a.coverage, 0.0);
        assert!(a.ordering.is_empty());
    }

    #[test]
    fn two_shapes_give_two_full_groups() {
        let ds = two_shapes();
        let p = SummaryParams {
            window_size: 10,
            minsup: 4,
            samples_per_bucket: 2,
            ..SummaryParams::default()
        };
        let a = summarize(&ds, &p).unwrap();
        assert_eq!(a.groups.len(), 2);
        assert_eq!(a.coverage, 1.0);
        let mut members: Vec<Vec<usize>> = a.groups.iter().map(|g| g.members.clone()).collect();
        members.sort();
        assert_eq!(members, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
        for (g, s) in a.groups.iter().zip(&a.stats) {
            assert!(g.members.contains(&s.medoid_index));
            assert_eq!(s.size, g.size());
        }
        assert_eq!(a, summarize(&ds, &p).unwrap());
    }
}
