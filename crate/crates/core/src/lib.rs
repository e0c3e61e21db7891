//! Visual summarization of large time-series collections.
//!
//! The pipeline splits every series into fixed-length intervals, clusters the
//! segments of each interval under DTW (accelerated by LSH sampling), encodes
//! each series as a sequence of cluster labels, mines frequent contiguous
//! label patterns and greedily extracts disjoint subsequence groups. Each
//! group is one chart: a medoid line, quantile bands and a density grid.
//!
//! ```
//! use tivy_core::{pipeline::summarize, model::{SummaryParams, TimeSeriesDataset}};
//!
//! let rows: Vec<Vec<f64>> = (0..8)
//!     .map(|i| (0..20).map(|t| if i < 4 { 0.0 } else { t as f64 }).collect())
//!     .collect();
//! let ds = TimeSeriesDataset::from_rows(rows).unwrap();
//! let params = SummaryParams {
//!     window_size: 10,
//!     minsup: 4,
//!     samples_per_bucket: 2,
//!     ..SummaryParams::default()
//! };
//! let artifact = summarize(&ds, &params).unwrap();
//! assert_eq!(artifact.groups.len(), 2);
//! ```

pub mod adaptive;
pub mod clustering;
pub mod distance;
pub mod eval;
pub mod export;
pub mod extract;
pub mod ingest;
mod linkage;
pub mod lsh;
pub mod mining;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod synthetic;
