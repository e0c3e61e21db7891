//! Agreement measures against known ground truth.

use std::collections::HashMap;
use std::hash::Hash;

use crate::model::{IntervalPartition, SubsequenceGroup};

/// Adjusted Rand index of two labelings of the same items.
pub fn adjusted_rand_index<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut joint: HashMap<(&A, &B), u64> = HashMap::new();
    let mut ca: HashMap<&A, u64> = HashMap::new();
    let mut cb: HashMap<&B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sa: f64 = ca.values().map(|&c| pairs(c)).sum();
    let sb: f64 = cb.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Most common truth sequence among a group's members over its sample range,
/// with the share of members carrying it.
fn majority<'a, T: Eq + Hash>(group: &SubsequenceGroup, partition: &IntervalPartition, truth: &'a [Vec<T>]) -> (&'a [T], f64) {
    let range = partition.span(group.interval_range.0, group.interval_range.1);
    let mut counts: HashMap<&[T], usize> = HashMap::new();
    let mut best: Option<(&[T], usize)> = None;
    for &m in &group.members {
        let key = &truth[m][range.clone()];
        let c = counts.entry(key).or_default();
        *c += 1;
        if best.is_none_or(|(_, b)| *c > b) {
            best = Some((key, *c));
        }
    }
    let (key, count) = best.expect("groups have members");
    (key, count as f64 / group.size() as f64)
}

/// Share of a group's members whose truth over the group's range matches the
/// most common one.
pub fn group_purity<T: Eq + Hash>(group: &SubsequenceGroup, partition: &IntervalPartition, truth: &[Vec<T>]) -> f64 {
    majority(group, partition, truth).1
}

/// Fraction of all (series, sample) cells that lie in a group whose majority
/// truth over the group's range equals the series' own truth there.
pub fn cell_recall<T: Eq + Hash>(groups: &[SubsequenceGroup], partition: &IntervalPartition, truth: &[Vec<T>]) -> f64 {
    let total: usize = truth.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let mut hit = 0;
    for g in groups {
        let range = partition.span(g.interval_range.0, g.interval_range.1);
        let (key, _) = majority(g, partition, truth);
        hit += g.members.iter().filter(|&&m| &truth[m][range.clone()] == key).count() * range.len();
    }
    hit as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pattern;

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 9, 9]), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0, 0], &[1, 1, 1, 1]), 1.0);
        // Hand computed: index 1, expected 2 * 2 / 6, max 2.
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 1, 1]);
        let expected = 2.0 * 3.0 / 6.0;
        assert!((ari - (1.0 - expected) / (0.5 * 5.0 - expected)).abs() < 1e-12);
        assert!(adjusted_rand_index(&[0, 1, 0, 1, 0, 1], &[0, 0, 0, 1, 1, 1]) < 0.1);
    }

    #[test]
    fn recall_and_purity() {
        let truth = vec![vec!['a', 'a'], vec!['a', 'a'], vec!['a', 'b'], vec!['c', 'c']];
        let part = IntervalPartition::uniform(2, 1).unwrap();
        let g = SubsequenceGroup::new(Pattern::new(0, vec![0, 0]), vec![0, 1, 2]);
        assert!((group_purity(&g, &part, &truth) - 2.0 / 3.0).abs() < 1e-12);
        assert!((cell_recall(&[g], &part, &truth) - 4.0 / 8.0).abs() < 1e-12);
        let h = SubsequenceGroup::new(Pattern::new(1, vec![0]), vec![2, 3]);
        assert_eq!(group_purity(&h, &part, &truth), 0.5);
    }
}
