//! Greedy extraction of disjoint subsequence groups from a pattern profile.
//!
//! Longest frequent patterns are tried first. A candidate is rejected when
//! taking it would push more than one equally long peer below `minsup`;
//! otherwise it becomes a group and its (series, interval) cells are removed
//! from every pattern whose interval range intersects it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Pattern, PatternProfile, SeriesIdx, SubsequenceGroup, SymbolMatrix};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("minsup must be at least 1, got {0}")]
    BadMinsup(usize),
    #[error("groups {0} and {1} share a (series, interval) cell")]
    Overlap(usize, usize),
    #[error("group {0} lies outside the symbol matrix")]
    OutOfRange(usize),
}

/// How the next candidate is picked from the longest-pattern shortlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateOrder {
    /// Uniformly at random from a seeded generator.
    #[default]
    Random,
    /// Largest support first, then the smallest pattern.
    Deterministic,
}

pub fn extract_groups(
    profile: &PatternProfile,
    minsup: usize,
    seed: u64,
) -> Result<Vec<SubsequenceGroup>, ExtractError> {
    extract_groups_with(profile, minsup, seed, CandidateOrder::Random)
}

pub fn extract_groups_with(
    profile: &PatternProfile,
    minsup: usize,
    seed: u64,
    order: CandidateOrder,
) -> Result<Vec<SubsequenceGroup>, ExtractError> {
    if minsup < 1 {
        return Err(ExtractError::BadMinsup(minsup));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Working copy of D, in pattern order so random picks are reproducible.
    let mut d: Vec<(Pattern, Vec<SeriesIdx>)> = profile
        .iter()
        .map(|(p, s)| (p.clone(), s.to_vec()))
        .collect();
    let mut groups = Vec::new();

    loop {
        d.retain(|(_, s)| s.len() >= minsup);
        if d.is_empty() {
            break;
        }
        let longest = d.iter().map(|(p, _)| p.len()).max().unwrap_or(0);
        let mut candidates: Vec<usize> = (0..d.len()).filter(|&i| d[i].0.len() == longest).collect();
        let mut deleted = vec![false; d.len()];

        while !candidates.is_empty() {
            let pick = match order {
                CandidateOrder::Random => rng.random_range(0..candidates.len()),
                CandidateOrder::Deterministic => deterministic_pick(&d, &candidates),
            };
            let c = candidates[pick];
            let (cand, cand_rows) = (&d[c].0, &d[c].1);

            let reduction = candidates
                .iter()
                .filter(|&&p| p != c)
                .filter(|&&p| {
                    let (pat, rows) = (&d[p].0, &d[p].1);
                    pat.overlaps(cand) && rows.len() - intersection_len(rows, cand_rows) < minsup
                })
                .count();

            if reduction > 1 {
                deleted[c] = true;
                candidates.swap_remove(pick);
                candidates.sort_unstable();
                continue;
            }

            let group = SubsequenceGroup::new(cand.clone(), cand_rows.clone());
            for (pat, rows) in d.iter_mut() {
                if pat.overlaps(&group.pattern) {
                    rows.retain(|r| group.members.binary_search(r).is_err());
                }
            }
            groups.push(group);
            candidates.retain(|&p| d[p].1.len() >= minsup);
        }

        let mut i = 0;
        d.retain(|_| {
            i += 1;
            !deleted[i - 1]
        });
    }
    Ok(groups)
}

fn deterministic_pick(d: &[(Pattern, Vec<SeriesIdx>)], candidates: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in candidates.iter().enumerate().skip(1) {
        let b = candidates[best];
        let better = d[c].1.len() > d[b].1.len() || (d[c].1.len() == d[b].1.len() && d[c].0 < d[b].0);
        if better {
            best = k;
        }
    }
    best
}

/// Size of the intersection of two sorted index lists.
fn intersection_len(a: &[SeriesIdx], b: &[SeriesIdx]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Checks that groups are pairwise cell-disjoint and inside the matrix.
pub fn check_disjoint(groups: &[SubsequenceGroup], rows: usize, cols: usize) -> Result<usize, ExtractError> {
    let mut owner: Vec<Option<usize>> = vec![None; rows * cols];
    let mut covered = 0;
    for (g, group) in groups.iter().enumerate() {
        let (s, e) = group.interval_range;
        if e >= cols || s > e {
            return Err(ExtractError::OutOfRange(g));
        }
        for &r in &group.members {
            if r >= rows {
                return Err(ExtractError::OutOfRange(g));
            }
            for c in s..=e {
                let cell = &mut owner[r * cols + c];
                if let Some(prev) = *cell {
                    return Err(ExtractError::Overlap(prev, g));
                }
                *cell = Some(g);
                covered += 1;
            }
        }
    }
    Ok(covered)
}

/// Fraction of (series, interval) cells covered by `groups`.
pub fn coverage(groups: &[SubsequenceGroup], sm: &SymbolMatrix) -> Result<f64, ExtractError> {
    let total = sm.rows() * sm.cols();
    let covered = check_disjoint(groups, sm.rows(), sm.cols())?;
    Ok(if total == 0 { 0.0 } else { covered as f64 / total as f64 })
}
