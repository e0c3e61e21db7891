//! Frequent contiguous pattern mining over the symbol matrix.
//!
//! Patterns grow one interval at a time. Extending a pattern only needs its
//! current supporters, partitioned by their symbol at the next interval, so
//! no projected databases are built. Branches whose support falls below
//! `minsup` are dropped immediately. Scans start from every interval.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::model::{Pattern, PatternProfile, SeriesIdx, SymbolMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MiningError {
    #[error("minsup must be at least 1, got {0}")]
    BadMinsup(usize),
}

/// All contiguous patterns with at least `minsup` supporters, each mapped to
/// its exact supporter set.
pub fn prefix_scan(sm: &SymbolMatrix, minsup: usize) -> Result<PatternProfile, MiningError> {
    if minsup < 1 {
        return Err(MiningError::BadMinsup(minsup));
    }
    let cols = sm.cols();
    if sm.rows() == 0 || cols == 0 {
        return Ok(PatternProfile::new());
    }
    let all: Vec<SeriesIdx> = (0..sm.rows()).collect();
    let per_start: Vec<Vec<(Pattern, Vec<SeriesIdx>)>> = (0..cols)
        .into_par_iter()
        .map(|start| scan_from(sm, start, &all, minsup))
        .collect();
    let mut entries = BTreeMap::new();
    for found in per_start {
        entries.extend(found);
    }
    Ok(PatternProfile::from_entries(entries))
}

fn scan_from(
    sm: &SymbolMatrix,
    start: usize,
    all: &[SeriesIdx],
    minsup: usize,
) -> Vec<(Pattern, Vec<SeriesIdx>)> {
    let mut out = Vec::new();
    // (symbols so far, supporters); the next column is start + symbols.len().
    let mut stack: Vec<(Vec<u32>, Vec<SeriesIdx>)> = Vec::new();
    for (sym, rows) in split_by_symbol(sm, start, all) {
        if rows.len() >= minsup {
            stack.push((vec![sym], rows));
        }
    }
    // Reverse so branches pop in ascending symbol order.
    stack.reverse();
    while let Some((symbols, rows)) = stack.pop() {
        let next = start + symbols.len();
        if next < sm.cols() {
            let mut children: Vec<(Vec<u32>, Vec<SeriesIdx>)> = split_by_symbol(sm, next, &rows)
                .into_iter()
                .filter(|(_, r)| r.len() >= minsup)
                .map(|(sym, r)| {
                    let mut s = symbols.clone();
                    s.push(sym);
                    (s, r)
                })
                .collect();
            children.reverse();
            stack.extend(children);
        }
        out.push((Pattern::new(start, symbols), rows));
    }
    out
}

/// Partitions `rows` (sorted) by their symbol at `col`; each part stays sorted.
fn split_by_symbol(sm: &SymbolMatrix, col: usize, rows: &[SeriesIdx]) -> Vec<(u32, Vec<SeriesIdx>)> {
    let k = sm.cluster_counts()[col] as usize;
    let mut parts: Vec<Vec<SeriesIdx>> = vec![Vec::new(); k];
    for &r in rows {
        parts[sm.get(r, col) as usize].push(r);
    }
    parts
        .into_iter()
        .enumerate()
        .filter(|(_, p)| !p.is_empty())
        .map(|(s, p)| (s as u32, p))
        .collect()
}

/// Number of supporters of `p`; 0 for patterns not in the profile.
pub fn support(profile: &PatternProfile, p: &Pattern) -> usize {
    profile.get(p).map_or(0, <[SeriesIdx]>::len)
}
