//! Dynamic time warping and Euclidean distances.
//!
//! DTW uses a squared-difference local cost and returns the square root of
//! the accumulated cost along the optimal monotone alignment, so that for
//! equal-length inputs `dtw(a, b) <= euclidean(a, b)`.

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DistanceError {
    #[error("distance of an empty sequence")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Accumulated squared cost of the optimal DTW alignment (before the root).
pub fn dtw_cost(a: &[f64], b: &[f64]) -> Result<f64, DistanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(DistanceError::Empty);
    }
    Ok(banded_cost(a, b, usize::MAX))
}

/// Full-window DTW distance.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64, DistanceError> {
    dtw_cost(a, b).map(f64::sqrt)
}

/// DTW restricted to alignments with `|i - j| <= band_radius`.
///
/// When the lengths differ by more than `band_radius` the band is widened to
/// the length difference so that a path always exists.
pub fn dtw_banded(a: &[f64], b: &[f64], band_radius: usize) -> Result<f64, DistanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(DistanceError::Empty);
    }
    Ok(banded_cost(a, b, band_radius).sqrt())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64, DistanceError> {
    if a.len() != b.len() {
        return Err(DistanceError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// DTW with an optional Sakoe-Chiba band, as a reusable metric value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dtw {
    pub band_radius: Option<usize>,
}

impl Dtw {
    pub fn full() -> Self {
        Self { band_radius: None }
    }

    pub fn banded(band_radius: usize) -> Self {
        Self {
            band_radius: Some(band_radius),
        }
    }

    /// Accumulated squared cost. Panics on empty input; callers slice
    /// segments out of validated datasets.
    pub fn cost(&self, a: &[f64], b: &[f64]) -> f64 {
        assert!(!a.is_empty() && !b.is_empty(), "DTW of an empty segment");
        banded_cost(a, b, self.band_radius.unwrap_or(usize::MAX))
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.cost(a, b).sqrt()
    }

    /// Accumulated cost, or infinity once it is certain to exceed `cutoff`.
    pub fn cost_within(&self, a: &[f64], b: &[f64], cutoff: f64) -> f64 {
        assert!(!a.is_empty() && !b.is_empty(), "DTW of an empty segment");
        bounded_cost(a, b, self.band_radius.unwrap_or(usize::MAX), cutoff)
    }
}

// Two-row DP over the shorter sequence. cell(i, j) = (a_i - b_j)^2 +
// min(cell(i-1, j-1), cell(i-1, j), cell(i, j-1)).
fn banded_cost(a: &[f64], b: &[f64], band_radius: usize) -> f64 {
    bounded_cost(a, b, band_radius, f64::INFINITY)
}

// As `banded_cost`, but gives up with infinity once every cell of a row
// exceeds `cutoff`. Rows are offset by one so column 0 is a fixed boundary.
fn bounded_cost(a: &[f64], b: &[f64], band_radius: usize, cutoff: f64) -> f64 {
    // Iterate rows over the longer input so the rows stay short.
    let (a, b) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let (la, lb) = (a.len(), b.len());
    let radius = band_radius.max(la - lb);

    let mut prev = vec![f64::INFINITY; lb + 1];
    let mut curr = vec![f64::INFINITY; lb + 1];
    prev[0] = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = i.saturating_add(radius).min(lb - 1);
        curr[lo] = f64::INFINITY;
        let mut row_min = f64::INFINITY;
        for j in lo..=hi {
            let d = (x - b[j]) * (x - b[j]);
            let v = d + prev[j].min(prev[j + 1]).min(curr[j]);
            curr[j + 1] = v;
            row_min = row_min.min(v);
        }
        if hi + 2 <= lb {
            curr[hi + 2] = f64::INFINITY;
        }
        if row_min > cutoff {
            return f64::INFINITY;
        }
        std::mem::swap(&mut prev, &mut curr);
        if i == 0 {
            curr[0] = f64::INFINITY;
        }
    }
    prev[lb]
}
