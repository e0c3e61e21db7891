//! Average-linkage agglomeration over a condensed dissimilarity matrix.
//!
//! The merge sequence comes from `kodama` (nearest-neighbor chain); this
//! module cuts the dendrogram, derives pooled within-cluster dispersions and
//! produces leaf orders.

use kodama::Method;

/// Position of pair `(i, j)`, `i < j`, in a condensed upper-triangle matrix.
#[inline]
pub(crate) fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    n * i - i * (i + 1) / 2 + j - i - 1
}

#[derive(Debug, Clone)]
pub(crate) struct Hierarchy {
    n: usize,
    /// `(cluster1, cluster2)` per merge, in non-decreasing dissimilarity.
    /// Step `t` creates cluster `n + t`.
    merges: Vec<(usize, usize)>,
}

impl Hierarchy {
    /// Average linkage on `distances` (length `n choose 2`).
    pub(crate) fn average(distances: &[f64], n: usize) -> Self {
        if n < 2 {
            return Self {
                n,
                merges: Vec::new(),
            };
        }
        let mut scratch = distances.to_vec();
        let dend = kodama::linkage(&mut scratch, n, Method::Average);
        let merges = dend
            .steps()
            .iter()
            .map(|s| (s.cluster1, s.cluster2))
            .collect();
        Self { n, merges }
    }

    /// Dense labels (numbered by first appearance) for a cut into `k`
    /// clusters, `1 <= k <= n`.
    pub(crate) fn cut(&self, k: usize) -> Vec<u32> {
        let n = self.n;
        let k = k.clamp(1, n.max(1));
        let mut parent: Vec<usize> = (0..2 * n).collect();
        for (t, &(a, b)) in self.merges.iter().take(n - k).enumerate() {
            parent[a] = n + t;
            parent[b] = n + t;
        }
        let mut root_label = std::collections::HashMap::new();
        (0..n)
            .map(|i| {
                let mut r = i;
                while parent[r] != r {
                    r = parent[r];
                }
                let next = root_label.len() as u32;
                *root_label.entry(r).or_insert(next)
            })
            .collect()
    }

    /// Pooled within-cluster dispersion `W_k = sum_c (sum_{i<j in c} sq_ij) / |c|`
    /// for `k = 1..=k_max` (index `k - 1`), from condensed squared
    /// dissimilarities.
    pub(crate) fn dispersions(&self, squared: &[f64], k_max: usize) -> Vec<f64> {
        let n = self.n;
        let k_max = k_max.min(n);
        let mut w = vec![0.0; k_max];
        if n == 0 {
            return w;
        }
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        members.resize(2 * n, Vec::new());
        let mut within = vec![0.0; 2 * n];
        let mut active: Vec<usize> = (0..n).collect();
        if n <= k_max {
            w[n - 1] = 0.0;
        }
        for (t, &(a, b)) in self.merges.iter().enumerate() {
            let mut cross = 0.0;
            for &i in &members[a] {
                for &j in &members[b] {
                    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                    cross += squared[condensed_index(n, lo, hi)];
                }
            }
            let id = n + t;
            within[id] = within[a] + within[b] + cross;
            let mut merged = std::mem::take(&mut members[a]);
            merged.append(&mut members[b]);
            members[id] = merged;
            active.retain(|&c| c != a && c != b);
            active.push(id);
            let k = n - t - 1;
            if k <= k_max {
                w[k - 1] = active
                    .iter()
                    .map(|&c| within[c] / members[c].len() as f64)
                    .sum();
            }
        }
        w
    }

    /// Observation order given by a depth-first walk of the dendrogram.
    pub(crate) fn leaf_order(&self) -> Vec<usize> {
        let n = self.n;
        if self.merges.is_empty() {
            return (0..n).collect();
        }
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(c) = stack.pop() {
            if c < n {
                order.push(c);
            } else {
                let (a, b) = self.merges[c - n];
                stack.push(b);
                stack.push(a);
            }
        }
        order
    }
}
