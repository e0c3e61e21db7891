//! Render statistics for groups: medoid centerline, envelope bands, density
//! grids and the display order of charts.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distance::Dtw;
use crate::linkage::Hierarchy;
use crate::model::{Band, DensityGrid, GroupStats, IntervalPartition, SubsequenceGroup, TimeSeriesDataset};

/// Index (into `lines`) minimizing the summed DTW distance to all other
/// lines. Ties go to the lowest index.
pub fn medoid<S: AsRef<[f64]> + Sync>(lines: &[S], metric: Dtw) -> usize {
    assert!(!lines.is_empty(), "medoid of an empty group");
    let k = lines.len();
    // Candidates are scanned in order; a candidate is dropped as soon as its
    // partial sum reaches the best complete one.
    let mut best = (0, f64::INFINITY);
    for i in 0..k {
        let mut sum = 0.0;
        for j in (0..k).filter(|&j| j != i) {
            if sum >= best.1 {
                break;
            }
            let budget = best.1 - sum;
            sum += metric
                .cost_within(lines[i].as_ref(), lines[j].as_ref(), budget * budget)
                .sqrt();
        }
        if sum < best.1 {
            best = (i, sum);
        }
    }
    best.0
}

/// Linear-interpolated quantile of sorted values (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-timestep `(min, max)` band and central 90% (5th to 95th percentile) band.
pub fn bands<S: AsRef<[f64]>>(lines: &[S]) -> (Band, Band) {
    assert!(!lines.is_empty(), "bands of an empty group");
    let len = lines[0].as_ref().len();
    let mut full = Band {
        lo: Vec::with_capacity(len),
        hi: Vec::with_capacity(len),
    };
    let mut q90 = full.clone();
    let mut column = Vec::with_capacity(lines.len());
    for t in 0..len {
        column.clear();
        column.extend(lines.iter().map(|l| l.as_ref()[t]));
        column.sort_by(f64::total_cmp);
        full.lo.push(column[0]);
        full.hi.push(column[column.len() - 1]);
        q90.lo.push(quantile_sorted(&column, 0.05));
        q90.hi.push(quantile_sorted(&column, 0.95));
    }
    (full, q90)
}

/// Rasterizes every polyline into a `rows x cols` grid spanning the group's
/// time and value extents. Each polyline marks every bin it passes through
/// once. Row 0 holds the lowest values.
pub fn density_bins<S: AsRef<[f64]>>(lines: &[S], rows: usize, cols: usize, t_range: (f64, f64)) -> DensityGrid {
    assert!(rows >= 1 && cols >= 1, "density grid needs at least one bin");
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    for l in lines {
        for &v in l.as_ref() {
            v_min = v_min.min(v);
            v_max = v_max.max(v);
        }
    }
    let mut counts = vec![0u32; rows * cols];
    let mut stamp = vec![usize::MAX; rows * cols];
    let span = v_max - v_min;
    let y_of = |v: f64| {
        if span > 0.0 {
            (v - v_min) / span * rows as f64
        } else {
            (rows / 2) as f64 + 0.5
        }
    };
    for (s, line) in lines.iter().enumerate() {
        let line = line.as_ref();
        let len = line.len();
        let mut mark = |r: usize, c: usize| {
            let idx = r * cols + c;
            if stamp[idx] != s {
                stamp[idx] = s;
                counts[idx] += 1;
            }
        };
        if len == 1 {
            mark(row_floor(y_of(line[0]), rows), 0);
            continue;
        }
        let x_of = |j: usize| j as f64 / (len - 1) as f64 * cols as f64;
        for j in 0..len - 1 {
            let (x0, x1) = (x_of(j), x_of(j + 1));
            let (y0, y1) = (y_of(line[j]), y_of(line[j + 1]));
            let c_first = (x0.floor() as usize).min(cols - 1);
            let c_last = ((x1.ceil() as usize).saturating_sub(1)).clamp(c_first, cols - 1);
            for c in c_first..=c_last {
                let xa = x0.max(c as f64);
                let xb = x1.min(c as f64 + 1.0);
                let ya = y0 + (y1 - y0) * (xa - x0) / (x1 - x0);
                let yb = y0 + (y1 - y0) * (xb - x0) / (x1 - x0);
                let (lo, hi) = if ya <= yb { (ya, yb) } else { (yb, ya) };
                let r_first = row_floor(lo, rows);
                let r_last = if hi > lo {
                    ((hi.ceil() as usize).saturating_sub(1)).clamp(r_first, rows - 1)
                } else {
                    r_first
                };
                for r in r_first..=r_last {
                    mark(r, c);
                }
            }
        }
    }
    DensityGrid {
        rows,
        cols,
        counts,
        t_min: t_range.0,
        t_max: t_range.1,
        v_min,
        v_max,
    }
}

fn row_floor(y: f64, rows: usize) -> usize {
    (y.max(0.0).floor() as usize).min(rows - 1)
}

/// Medoid, bands and density grid of one group over its sample range.
pub fn group_stats(
    group: &SubsequenceGroup,
    ds: &TimeSeriesDataset,
    partition: &IntervalPartition,
    metric: Dtw,
    density_rows: usize,
    density_max_cols: usize,
) -> GroupStats {
    let range = partition.span(group.interval_range.0, group.interval_range.1);
    let lines: Vec<&[f64]> = group.members.iter().map(|&i| ds.segment(i, range.clone())).collect();
    let m = medoid(&lines, metric);
    let (band_full, band_q90) = bands(&lines);
    let axis = ds.time_axis();
    let t_range = (axis[range.start], axis[range.end - 1]);
    let cols = range.len().clamp(1, density_max_cols.max(1));
    GroupStats {
        medoid_index: group.members[m],
        band_full,
        band_q90,
        density: density_bins(&lines, density_rows, cols, t_range),
        size: group.size(),
    }
}

fn intersect(a: &Range<usize>, b: &Range<usize>) -> Option<Range<usize>> {
    let r = a.start.max(b.start)..a.end.min(b.end);
    (r.start < r.end).then_some(r)
}

/// Display order of groups: one seeded sample per group, average linkage on
/// overlap-restricted DTW between samples, then the dendrogram leaf order.
/// Pairs without a common interval get a distance far above every real one.
pub fn order_groups(
    groups: &[SubsequenceGroup],
    ds: &TimeSeriesDataset,
    partition: &IntervalPartition,
    seed: u64,
    metric: Dtw,
) -> Vec<usize> {
    let n = groups.len();
    if n <= 1 {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(usize, Range<usize>)> = groups
        .iter()
        .map(|g| {
            let pick = g.members[rng.random_range(0..g.members.len())];
            (pick, partition.span(g.interval_range.0, g.interval_range.1))
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut dist: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (si, ri) = &samples[i];
            let (sj, rj) = &samples[j];
            intersect(ri, rj).map(|o| metric.distance(ds.segment(*si, o.clone()), ds.segment(*sj, o)))
        })
        .collect();
    let max_finite = dist.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let sentinel = (max_finite + 1.0) * 1e6;
    let condensed: Vec<f64> = dist.drain(..).map(|d| d.unwrap_or(sentinel)).collect();
    Hierarchy::average(&condensed, n).leaf_order()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pattern;
    use rand::Rng;

    #[test]
    fn medoid_examples() {
        assert_eq!(medoid(&[vec![1.0, 2.0]], Dtw::full()), 0);
        let lines = vec![vec![9.0, 9.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        assert_eq!(medoid(&lines, Dtw::full()), 1);
    }

    #[test]
    fn medoid_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lines: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..20).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let mut best = (f64::INFINITY, 0);
        for i in 0..8 {
            let mut s = 0.0;
            for j in 0..8 {
                if i != j {
                    s += crate::distance::oracle::full_table_cost(&lines[i], &lines[j], None).sqrt();
                }
            }
            if s < best.0 {
                best = (s, i);
            }
        }
        assert_eq!(medoid(&lines, Dtw::full()), best.1);
    }

    #[test]
    fn band_examples() {
        let (full, q) = bands(&[vec![1.0, -2.0]]);
        assert_eq!(full.lo, vec![1.0, -2.0]);
        assert_eq!(full.hi, full.lo);
        assert_eq!(q.lo, full.lo);
        assert_eq!(q.hi, full.lo);

        let lines: Vec<Vec<f64>> = (0..10).map(|v| vec![v as f64]).collect();
        let (full, q) = bands(&lines);
        assert!((q.lo[0] - 0.45).abs() < 1e-12);
        assert!((q.hi[0] - 8.55).abs() < 1e-12);
        assert_eq!((full.lo[0], full.hi[0]), (0.0, 9.0));
    }

    #[test]
    fn bands_are_nested() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lines: Vec<Vec<f64>> = (0..37)
            .map(|_| (0..15).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let (full, q) = bands(&lines);
        for t in 0..15 {
            assert!(full.lo[t] <= q.lo[t] && q.lo[t] <= q.hi[t] && q.hi[t] <= full.hi[t]);
        }
    }

    #[test]
    fn flat_line_fills_middle_row() {
        let g = density_bins(&[vec![2.0; 10]], 3, 5, (0.0, 9.0));
        for r in 0..3 {
            for c in 0..5 {
                assert_eq!(g.get(r, c), u32::from(r == 1));
            }
        }
    }

    #[test]
    fn identical_lines_add_up() {
        let line = vec![0.0, 3.0, -1.0, 2.0, 2.5];
        let one = density_bins(&[line.clone()], 6, 4, (0.0, 1.0));
        let many = density_bins(&vec![line; 7], 6, 4, (0.0, 1.0));
        for (a, b) in one.counts.iter().zip(&many.counts) {
            assert_eq!(*a * 7, *b);
        }
    }

    /// Dense-sampling rasterizer: marks the bin of many interior points of
    /// every segment.
    fn sampled_bins(line: &[f64], rows: usize, cols: usize, lo: f64, hi: f64) -> Vec<bool> {
        let mut hit = vec![false; rows * cols];
        let len = line.len();
        for j in 0..len - 1 {
            for k in 0..4000 {
                let t = (k as f64 + 0.5) / 4000.0;
                let x = (j as f64 + t) / (len - 1) as f64 * cols as f64;
                let v = line[j] + (line[j + 1] - line[j]) * t;
                let y = (v - lo) / (hi - lo) * rows as f64;
                let c = (x.floor() as usize).min(cols - 1);
                let r = (y.floor() as usize).min(rows - 1);
                hit[r * cols + c] = true;
            }
        }
        hit
    }

    #[test]
    fn diagonal_matches_sampling_oracle() {
        let line = [0.0, 1.0, 2.0, 3.0, 4.0];
        let g = density_bins(&[line], 4, 4, (0.0, 4.0));
        let oracle = sampled_bins(&line, 4, 4, 0.0, 4.0);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(g.get(r, c) == 1, r == c);
                assert_eq!(g.get(r, c) == 1, oracle[r * 4 + c]);
            }
        }
    }

    #[test]
    fn traversal_covers_sampled_bins_and_every_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let len = rng.random_range(2..30);
            let (rows, cols) = (rng.random_range(1..20), rng.random_range(1..20));
            let line: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = density_bins(&[line.clone()], rows, cols, (0.0, 1.0));
            let lo = line.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = line.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let oracle = sampled_bins(&line, rows, cols, lo, hi);
            for (i, &h) in oracle.iter().enumerate() {
                if h {
                    assert_eq!(g.counts[i], 1);
                }
            }
            for c in 0..cols {
                assert!((0..rows).map(|r| g.get(r, c)).sum::<u32>() >= 1);
            }
            assert!(g.counts.iter().all(|&x| x <= 1));
        }
    }

    fn ds_from(rows: Vec<Vec<f64>>) -> TimeSeriesDataset {
        TimeSeriesDataset::from_rows(rows).unwrap()
    }

    #[test]
    fn order_examples() {
        let ds = ds_from(vec![vec![0.0; 4], vec![5.0; 4], vec![0.1; 4], vec![9.0; 4]]);
        let part = IntervalPartition::uniform(4, 4).unwrap();
        let one = [SubsequenceGroup::new(Pattern::new(0, vec![0]), vec![0])];
        assert_eq!(order_groups(&one, &ds, &part, 0, Dtw::full()), vec![0]);

        let groups: Vec<SubsequenceGroup> = (0..4)
            .map(|i| SubsequenceGroup::new(Pattern::new(0, vec![i as u32]), vec![i]))
            .collect();
        let order = order_groups(&groups, &ds, &part, 3, Dtw::full());
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        let p0 = order.iter().position(|&g| g == 0).unwrap();
        let p2 = order.iter().position(|&g| g == 2).unwrap();
        assert_eq!(p0.abs_diff(p2), 1);
    }

    #[test]
    fn stats_are_idempotent() {
        let ds = ds_from((0..6).map(|i| (0..8).map(|t| (i * t) as f64).collect()).collect());
        let part = IntervalPartition::uniform(8, 4).unwrap();
        let g = SubsequenceGroup::new(Pattern::new(1, vec![0]), vec![1, 3, 4]);
        let a = group_stats(&g, &ds, &part, Dtw::full(), 8, 512);
        let b = group_stats(&g, &ds, &part, Dtw::full(), 8, 512);
        assert_eq!(a, b);
        assert_eq!(a.density.cols, 4);
        assert_eq!((a.density.t_min, a.density.t_max), (4.0, 7.0));
        assert!(a.band_full.lo.iter().all(|&v| v >= a.density.v_min));
    }
}
