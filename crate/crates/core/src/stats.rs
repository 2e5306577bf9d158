//! Robustness arithmetic and summary statistics for violin-style plots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 20;

/// `map_cell / map_clean`.
pub fn robustness_rate(map_cell: f64, map_clean: f64) -> Result<f64> {
    if map_clean == 0.0 {
        return Err(Error::UndefinedRate);
    }
    Ok(map_cell / map_clean)
}

/// Percentage change of `score_aug` relative to `score_base`.
pub fn relative_improvement(score_aug: f64, score_base: f64) -> Result<f64> {
    if score_base == 0.0 {
        return Err(Error::UndefinedRate);
    }
    Ok(100.0 * (score_aug - score_base) / score_base)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub p5: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

/// Nearest-rank percentile of sorted data: the value at rank `ceil(p/100 * n)`.
fn nearest_rank(sorted: &[f64], percent: usize) -> f64 {
    let n = sorted.len();
    let rank = (percent * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Mean, nearest-rank median/quartiles/5th/95th percentiles (so the median of
/// an even count is the lower middle value) and a 20-bin histogram over
/// `[0, max]`.
pub fn aggregate_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::Stats("no values to summarize".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stats("non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for &v in &sorted {
        let bin = if max > 0.0 {
            ((v / max * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    Ok(SummaryStats {
        count: n,
        mean: sorted.iter().sum::<f64>() / n as f64,
        median: nearest_rank(&sorted, 50),
        q1: nearest_rank(&sorted, 25),
        q3: nearest_rank(&sorted, 75),
        p5: nearest_rank(&sorted, 5),
        p95: nearest_rank(&sorted, 95),
        min: sorted[0],
        max,
        histogram: Histogram {
            lower: 0.0,
            upper: max.max(0.0),
            counts,
        },
    })
}
