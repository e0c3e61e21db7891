//! Labeled synthetic data: six trend classes of configurable durations.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::TimeSeriesDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeClass {
    Cyclic,
    Normal,
    Increasing,
    Decreasing,
    UpwardShift,
    DownwardShift,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 6] = [
        ShapeClass::Cyclic,
        ShapeClass::Normal,
        ShapeClass::Increasing,
        ShapeClass::Decreasing,
        ShapeClass::UpwardShift,
        ShapeClass::DownwardShift,
    ];
}

/// Shape parameters shared by all classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeConfig {
    /// Peak-to-peak size of trends and shifts.
    pub amplitude: f64,
    /// Period of the cyclic class, in samples.
    pub period: f64,
    /// Largest phase offset of the cyclic class, in samples.
    pub phase_jitter: i64,
    /// Step positions vary by multiples of `shift_jitter_step` up to
    /// `shift_jitter` samples either way.
    pub shift_jitter: i64,
    pub shift_jitter_step: i64,
    /// Standard deviation of additive white noise.
    pub noise: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            period: 25.0,
            phase_jitter: 0,
            shift_jitter: 10,
            shift_jitter_step: 5,
            noise: 0.0,
        }
    }
}

/// One instance of `class` lasting `len` samples.
pub fn shape(class: ShapeClass, len: usize, cfg: &ShapeConfig, rng: &mut impl Rng) -> Vec<f64> {
    let a = cfg.amplitude;
    let frac = |t: usize| if len > 1 { t as f64 / (len - 1) as f64 } else { 0.0 };
    let mut step_at = || {
        let steps = cfg.shift_jitter / cfg.shift_jitter_step.max(1);
        let k = rng.random_range(-steps..=steps) * cfg.shift_jitter_step.max(1);
        ((0.4 * len as f64).round() as i64 + k).clamp(1, len as i64 - 1) as usize
    };
    let mut out: Vec<f64> = match class {
        ShapeClass::Normal => vec![0.0; len],
        ShapeClass::Cyclic => {
            let phase = rng.random_range(-cfg.phase_jitter..=cfg.phase_jitter) as f64;
            (0..len)
                .map(|t| 0.5 * a * (std::f64::consts::TAU * (t as f64 + phase) / cfg.period).sin())
                .collect()
        }
        ShapeClass::Increasing => (0..len).map(|t| a * (frac(t) - 0.5)).collect(),
        ShapeClass::Decreasing => (0..len).map(|t| a * (0.5 - frac(t))).collect(),
        ShapeClass::UpwardShift => {
            let s = step_at();
            (0..len).map(|t| if t < s { -0.5 * a } else { 0.5 * a }).collect()
        }
        ShapeClass::DownwardShift => {
            let s = step_at();
            (0..len).map(|t| if t < s { 0.5 * a } else { -0.5 * a }).collect()
        }
    };
    if cfg.noise > 0.0 {
        let n = Normal::new(0.0, cfg.noise).expect("finite noise");
        out.iter_mut().for_each(|v| *v += n.sample(rng));
    }
    out
}

/// A dataset with the true class of every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub dataset: TimeSeriesDataset,
    /// `truth[i][t]` is the class of series `i` at sample `t`.
    pub truth: Vec<Vec<ShapeClass>>,
    /// Class segments of every series.
    pub segments: Vec<Vec<(Range<usize>, ShapeClass)>>,
}

/// Series built by concatenating class shapes. Each combination is a list of
/// `(class, duration)` pieces; `per_combination` series are drawn for each.
pub fn concatenated(
    combinations: &[Vec<(ShapeClass, usize)>],
    per_combination: usize,
    cfg: &ShapeConfig,
    seed: u64,
) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    let mut segments = Vec::new();
    for combo in combinations {
        for _ in 0..per_combination {
            let mut row = Vec::new();
            let mut tr = Vec::new();
            let mut seg = Vec::new();
            for &(class, len) in combo {
                let start = row.len();
                row.extend(shape(class, len, cfg, &mut rng));
                tr.extend(std::iter::repeat_n(class, len));
                seg.push((start..start + len, class));
            }
            rows.push(row);
            truth.push(tr);
            segments.push(seg);
        }
    }
    LabeledDataset {
        dataset: TimeSeriesDataset::from_rows(rows).expect("generated rows are rectangular"),
        truth,
        segments,
    }
}

/// How class durations split the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DurationMix {
    /// One class for the whole series.
    Whole,
    /// Two classes of half the length each.
    Halves,
    /// Four classes of a quarter of the length each.
    Quarters,
}

impl DurationMix {
    pub const ALL: [DurationMix; 3] = [DurationMix::Whole, DurationMix::Halves, DurationMix::Quarters];

    pub fn pieces(self) -> usize {
        match self {
            DurationMix::Whole => 1,
            DurationMix::Halves => 2,
            DurationMix::Quarters => 4,
        }
    }
}

/// Six class combinations for `mix`: combination `c` takes classes
/// `c, c + 1, ...` (cyclically) for its pieces.
pub fn six_class_combinations(mix: DurationMix, series_len: usize) -> Vec<Vec<(ShapeClass, usize)>> {
    let p = mix.pieces();
    assert_eq!(series_len % p, 0, "series length must split evenly");
    (0..6)
        .map(|c| (0..p).map(|k| (ShapeClass::ALL[(c + k) % 6], series_len / p)).collect())
        .collect()
}

/// The six-class benchmark: six combinations of `mix`, `per_combination`
/// series each.
pub fn six_class_dataset(
    mix: DurationMix,
    series_len: usize,
    per_combination: usize,
    cfg: &ShapeConfig,
    seed: u64,
) -> LabeledDataset {
    concatenated(&six_class_combinations(mix, series_len), per_combination, cfg, seed)
}
