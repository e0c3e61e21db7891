//! Loading, regularizing and normalizing raw series.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::TimeSeriesDataset;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(String),
    #[error("malformed csv: {0}")]
    Csv(String),
    /// Zero-based data row (header excluded) and column of a bad cell.
    #[error("non-numeric cell at row {row}, column {col}")]
    Parse { row: usize, col: usize },
    #[error("dataset has no series or no samples")]
    Empty,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("series have different lengths (enable interpolation or trimming)")]
    RaggedLengths,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("time axis is not strictly increasing with uniform spacing")]
    IrregularSampling,
    #[error("series time ranges have no common overlap")]
    NoCommonSupport,
    #[error("series {0} has zero variance")]
    ZeroVariance(String),
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One series per row; every cell is a sample.
    #[default]
    RowsAreSeries,
    /// Columns `id,timestamp,value`, one sample per row.
    Long,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvOptions {
    pub layout: Layout,
    pub has_header: bool,
    /// Rows-are-series only: the first column holds the series id.
    pub id_column: bool,
    /// Drop exact zeros after the last nonzero sample of each series; without
    /// interpolation, series are then cut to the shortest length.
    pub trim_trailing_zeros: bool,
    /// Resample every series onto a uniform grid of this many points.
    pub interpolate: Option<usize>,
}

/// One irregular or unaligned input series.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub id: String,
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<TimeSeriesDataset, IngestError> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, opts)
}

pub fn load_csv_reader<R: Read>(reader: R, opts: &CsvOptions) -> Result<TimeSeriesDataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::Csv(e.to_string()))?;
        records.push(rec);
    }
    match opts.layout {
        Layout::RowsAreSeries => rows_layout(&records, opts),
        Layout::Long => long_layout(&records, opts),
    }
}

fn parse_cell(s: &str, row: usize, col: usize) -> Result<f64, IngestError> {
    s.parse::<f64>().map_err(|_| IngestError::Parse { row, col })
}

fn rows_layout(records: &[csv::StringRecord], opts: &CsvOptions) -> Result<TimeSeriesDataset, IngestError> {
    let mut ids = Vec::with_capacity(records.len());
    let mut rows = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        let mut cells: Vec<&str> = rec.iter().collect();
        // Trailing empty cells are padding, not samples.
        while cells.last().is_some_and(|c| c.is_empty()) {
            cells.pop();
        }
        if cells.is_empty() {
            continue;
        }
        let first = if opts.id_column { 1 } else { 0 };
        ids.push(if opts.id_column {
            cells[0].to_string()
        } else {
            r.to_string()
        });
        let row = cells[first..]
            .iter()
            .enumerate()
            .map(|(c, s)| parse_cell(s, r, c + first))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    if opts.trim_trailing_zeros {
        trim_rows(&mut rows, opts.interpolate.is_none());
    }
    if let Some(n) = opts.interpolate {
        // Without timestamps, each row spans normalized time [0, 1].
        let raw = ids
            .into_iter()
            .zip(rows)
            .map(|(id, values)| {
                let len = values.len();
                let denom = (len.max(2) - 1) as f64;
                RawSeries {
                    id,
                    timestamps: (0..len).map(|j| j as f64 / denom).collect(),
                    values,
                }
            })
            .collect::<Vec<_>>();
        return interpolate_to_grid(&raw, n);
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(IngestError::RaggedLengths);
    }
    TimeSeriesDataset::new(ids, (0..n).map(|i| i as f64).collect(), rows)
}

fn trim_rows(rows: &mut [Vec<f64>], cut_to_shortest: bool) {
    for row in rows.iter_mut() {
        let keep = row.iter().rposition(|&v| v != 0.0).map_or(1, |p| p + 1);
        row.truncate(keep);
    }
    if cut_to_shortest {
        let shortest = rows.iter().map(Vec::len).min().unwrap_or(0);
        rows.iter_mut().for_each(|r| r.truncate(shortest));
    }
}

fn long_layout(records: &[csv::StringRecord], opts: &CsvOptions) -> Result<TimeSeriesDataset, IngestError> {
    let mut order: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut samples: Vec<Vec<(f64, f64)>> = Vec::new();
    for (r, rec) in records.iter().enumerate() {
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < 3 {
            return Err(IngestError::Shape(format!(
                "row {r} has {} columns, expected id,timestamp,value",
                rec.len()
            )));
        }
        let t = parse_cell(&rec[1], r, 1)?;
        let v = parse_cell(&rec[2], r, 2)?;
        let slot = *index.entry(rec[0].to_string()).or_insert_with(|| {
            order.push(rec[0].to_string());
            samples.push(Vec::new());
            samples.len() - 1
        });
        samples[slot].push((t, v));
    }
    if samples.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut raw = Vec::with_capacity(samples.len());
    for (id, mut s) in order.into_iter().zip(samples) {
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        if s.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(IngestError::Shape(format!("duplicate timestamp in series {id}")));
        }
        let (timestamps, values) = s.into_iter().unzip();
        raw.push(RawSeries {
            id,
            timestamps,
            values,
        });
    }
    if opts.trim_trailing_zeros {
        let mut rows: Vec<Vec<f64>> = raw.iter().map(|s| s.values.clone()).collect();
        trim_rows(&mut rows, opts.interpolate.is_none());
        for (s, row) in raw.iter_mut().zip(rows) {
            s.timestamps.truncate(row.len());
            s.values = row;
        }
    }
    if let Some(n) = opts.interpolate {
        return interpolate_to_grid(&raw, n);
    }
    let axis = raw[0].timestamps.clone();
    if raw.iter().any(|s| s.timestamps.len() != axis.len()) {
        return Err(IngestError::RaggedLengths);
    }
    if raw.iter().any(|s| s.timestamps != axis) {
        return Err(IngestError::IrregularSampling);
    }
    let ids = raw.iter().map(|s| s.id.clone()).collect();
    TimeSeriesDataset::new(ids, axis, raw.into_iter().map(|s| s.values).collect())
}

/// Linearly resamples every series onto `grid_size` uniform points spanning
/// the time range all series cover. No extrapolation.
pub fn interpolate_to_grid(raw: &[RawSeries], grid_size: usize) -> Result<TimeSeriesDataset, IngestError> {
    if raw.is_empty() || grid_size == 0 {
        return Err(IngestError::Empty);
    }
    for s in raw {
        if s.timestamps.len() != s.values.len() {
            return Err(IngestError::Shape(format!(
                "series {} has {} timestamps and {} values",
                s.id,
                s.timestamps.len(),
                s.values.len()
            )));
        }
        if s.timestamps.len() < 2 {
            return Err(IngestError::Shape(format!(
                "series {} needs at least 2 samples",
                s.id
            )));
        }
        if s.timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(IngestError::IrregularSampling);
        }
    }
    let lo = raw
        .iter()
        .map(|s| s.timestamps[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = raw
        .iter()
        .map(|s| s.timestamps[s.timestamps.len() - 1])
        .fold(f64::INFINITY, f64::min);
    if lo > hi || (lo == hi && grid_size > 1) {
        return Err(IngestError::NoCommonSupport);
    }
    let grid: Vec<f64> = if grid_size == 1 {
        vec![lo]
    } else {
        let step = (hi - lo) / (grid_size - 1) as f64;
        (0..grid_size)
            .map(|k| if k == grid_size - 1 { hi } else { lo + k as f64 * step })
            .collect()
    };
    let rows = raw
        .iter()
        .map(|s| grid.iter().map(|&t| interpolate_at(&s.timestamps, &s.values, t)).collect())
        .collect();
    let ids = raw.iter().map(|s| s.id.clone()).collect();
    TimeSeriesDataset::new(ids, grid, rows)
}

// `t` must lie inside [ts[0], ts[last]].
fn interpolate_at(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let i = ts.partition_point(|&x| x < t);
    if i < ts.len() && ts[i] == t {
        return vs[i];
    }
    let (t0, t1) = (ts[i - 1], ts[i]);
    let (v0, v1) = (vs[i - 1], vs[i]);
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    Zscore,
}

/// Per-series normalization over the full length. Z-scores use the
/// population variance.
pub fn normalize(ds: &TimeSeriesDataset, mode: Normalization) -> Result<TimeSeriesDataset, IngestError> {
    match mode {
        Normalization::None => Ok(ds.clone()),
        Normalization::Zscore => {
            let mut out = ds.clone();
            for (row, id) in out.rows_mut().zip(ds.series_ids()) {
                let n = row.len() as f64;
                let mean = row.iter().sum::<f64>() / n;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                if var == 0.0 || row.iter().all(|&v| v == row[0]) {
                    return Err(IngestError::ZeroVariance(id.clone()));
                }
                let sd = var.sqrt();
                row.iter_mut().for_each(|v| *v = (*v - mean) / sd);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn read(text: &str, opts: &CsvOptions) -> Result<TimeSeriesDataset, IngestError> {
        load_csv_reader(text.as_bytes(), opts)
    }

    #[test]
    fn rows_layout_parses() {
        let ds = read("1,2,3,4\n5,6,7,8\n9,10,11,12\n", &CsvOptions::default()).unwrap();
        assert_eq!((ds.len(), ds.series_len()), (3, 4));
        assert_eq!(ds.row(1), &[5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn long_layout_pivots() {
        let mut text = String::from("id,timestamp,value\n");
        for t in 0..5 {
            text += &format!("b,{t},{}\n", t * 10);
            text += &format!("a,{t},{}\n", -t);
        }
        let opts = CsvOptions {
            layout: Layout::Long,
            has_header: true,
            ..CsvOptions::default()
        };
        let ds = read(&text, &opts).unwrap();
        assert_eq!((ds.len(), ds.series_len()), (2, 5));
        assert_eq!(ds.series_ids(), &["b".to_string(), "a".to_string()]);
        assert_eq!(ds.row(1), &[0.0, -1.0, -2.0, -3.0, -4.0]);
    }

    #[test]
    fn parse_error_position() {
        let err = read("1,2,3\n4,5,abc\n", &CsvOptions::default()).unwrap_err();
        assert_eq!(err, IngestError::Parse { row: 1, col: 2 });
    }

    #[test]
    fn ragged_rows_rejected_without_interpolation() {
        let err = read("1,2,3\n4,5\n", &CsvOptions::default()).unwrap_err();
        assert_eq!(err, IngestError::RaggedLengths);
        let opts = CsvOptions {
            interpolate: Some(3),
            ..CsvOptions::default()
        };
        let ds = read("1,2,3\n4,6\n", &opts).unwrap();
        assert_eq!(ds.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn trims_trailing_zeros() {
        let opts = CsvOptions {
            trim_trailing_zeros: true,
            ..CsvOptions::default()
        };
        let ds = read("1,2,3,0,0\n4,5,0,6,0\n", &opts).unwrap();
        assert_eq!(ds.series_len(), 3);
        assert_eq!(ds.row(1), &[4.0, 5.0, 0.0]);
    }

    #[test]
    fn id_column_and_header() {
        let opts = CsvOptions {
            has_header: true,
            id_column: true,
            ..CsvOptions::default()
        };
        let ds = read("id,t0,t1\nx,1,2\ny,3,4\n", &opts).unwrap();
        assert_eq!(ds.series_ids(), &["x".to_string(), "y".to_string()]);
        assert_eq!(ds.row(0), &[1.0, 2.0]);
    }

    fn raw(id: &str, ts: &[f64], vs: &[f64]) -> RawSeries {
        RawSeries {
            id: id.into(),
            timestamps: ts.to_vec(),
            values: vs.to_vec(),
        }
    }

    #[test]
    fn interpolation_examples() {
        let ds = interpolate_to_grid(&[raw("a", &[0.0, 2.0], &[0.0, 2.0])], 3).unwrap();
        assert_eq!(ds.row(0), &[0.0, 1.0, 2.0]);

        let ts = [0.0, 0.5, 1.0, 1.5];
        let vs = [3.0, -1.0, 2.5, 7.0];
        let ds = interpolate_to_grid(&[raw("a", &ts, &vs)], 4).unwrap();
        assert_eq!(ds.row(0), &vs);
        assert_eq!(ds.time_axis(), &ts);

        // Overlap [2, 3]: hand linear formula at t = 2, 2.5, 3.
        let a = raw("a", &[1.0, 3.0], &[10.0, 30.0]);
        let b = raw("b", &[2.0, 4.0], &[0.0, -4.0]);
        let ds = interpolate_to_grid(&[a, b], 3).unwrap();
        let lin = |t0: f64, v0: f64, t1: f64, v1: f64, t: f64| v0 + (v1 - v0) * (t - t0) / (t1 - t0);
        for (k, t) in [2.0, 2.5, 3.0].into_iter().enumerate() {
            assert!((ds.row(0)[k] - lin(1.0, 10.0, 3.0, 30.0, t)).abs() < 1e-12);
            assert!((ds.row(1)[k] - lin(2.0, 0.0, 4.0, -4.0, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn no_common_support() {
        let a = raw("a", &[0.0, 1.0], &[0.0, 1.0]);
        let b = raw("b", &[2.0, 3.0], &[0.0, 1.0]);
        assert_eq!(interpolate_to_grid(&[a, b], 4), Err(IngestError::NoCommonSupport));
    }

    #[test]
    fn zscore_examples() {
        let ds = TimeSeriesDataset::from_rows(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let z = normalize(&ds, Normalization::Zscore).unwrap();
        let r = z.row(0);
        let mean = r.iter().sum::<f64>() / 3.0;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-9);

        let same = normalize(&ds, Normalization::None).unwrap();
        assert_eq!(same, ds);

        let flat = TimeSeriesDataset::new(vec!["k".into()], vec![0.0, 1.0], vec![vec![0.1, 0.1]]).unwrap();
        assert_eq!(
            normalize(&flat, Normalization::Zscore),
            Err(IngestError::ZeroVariance("k".into()))
        );
    }

    #[test]
    fn zscore_moments_on_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..50).map(|_| rng.random_range(-100.0..100.0)).collect())
            .collect();
        let ds = TimeSeriesDataset::from_rows(rows).unwrap();
        let z = normalize(&ds, Normalization::Zscore).unwrap();
        for r in z.rows() {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for &v in r {
                s += v;
                s2 += v * v;
            }
            let mean = s / 50.0;
            assert!(mean.abs() < 1e-9);
            assert!((s2 / 50.0 - mean * mean - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn zscore_is_idempotent(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3..30), 1..6)) {
            let n = rows.iter().map(Vec::len).min().unwrap();
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.truncate(n); r }).collect();
            prop_assume!(rows.iter().all(|r| r.iter().any(|&v| (v - r[0]).abs() > 1e-3)));
            let ds = TimeSeriesDataset::from_rows(rows).unwrap();
            let once = normalize(&ds, Normalization::Zscore).unwrap();
            let twice = normalize(&once, Normalization::Zscore).unwrap();
            for (a, b) in once.rows().zip(twice.rows()) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn interpolation_exact_on_grid_samples(vals in prop::collection::vec(-50.0f64..50.0, 2..40), scale in 0.1f64..10.0) {
            let ts: Vec<f64> = (0..vals.len()).map(|i| i as f64 * scale).collect();
            let ds = interpolate_to_grid(&[raw("s", &ts, &vals)], vals.len()).unwrap();
            for (g, v) in ds.row(0).iter().zip(&vals) {
                prop_assert!((g - v).abs() <= 1e-9 * v.abs().max(1.0));
            }
        }
    }
}
