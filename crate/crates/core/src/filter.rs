//! Entropy-based removal of corrupted rows.
//!
//! Each sequence is scored by four statistics (entropy, distinct symbol count,
//! mean, variance). After z-scoring across rows they are combined into
//!
//! ```text
//! S = -Z_E - Z_U + 0.5 Z_M + 0.5 Z_V
//! ```
//!
//! where `Z_M` and `Z_V` use absolute deviation from the mean. Constant or
//! low-diversity rows get high `S`. By default the `N - C` rows with the lowest
//! `S` are kept; [`FilterOptions::keep_high_s`] flips the ranking.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::gen::ObsMatrix;

pub const W_MEAN: f64 = 0.5;
pub const W_VAR: f64 = 0.5;

/// Per-row statistics of one sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowMetrics {
    /// Shannon entropy of the symbol histogram, in bits.
    pub entropy: f64,
    pub unique: usize,
    pub mean: f64,
    /// Sample variance (divisor `T - 1`; zero when `T = 1`).
    pub variance: f64,
}

/// Statistics of a single row. Panics on an empty row.
pub fn row_metrics(row: &[u32]) -> RowMetrics {
    assert!(!row.is_empty(), "row_metrics needs a nonempty row");
    let t = row.len() as f64;
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &s in row {
        *counts.entry(s).or_default() += 1;
    }
    let entropy = counts
        .values()
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);
    let mean = row.iter().map(|&s| s as f64).sum::<f64>() / t;
    let variance = if row.len() > 1 {
        row.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / (t - 1.0)
    } else {
        0.0
    };
    RowMetrics {
        entropy,
        unique: counts.len(),
        mean,
        variance,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FilterOptions {
    /// Keep the highest-scoring rows instead of the lowest.
    pub keep_high_s: bool,
}

/// Scores and outcome of one filter pass.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterStats {
    pub metrics: Vec<RowMetrics>,
    pub z_entropy: Vec<f64>,
    pub z_unique: Vec<f64>,
    pub z_mean: Vec<f64>,
    pub z_var: Vec<f64>,
    pub score: Vec<f64>,
    /// Original indices of the kept rows, ascending.
    pub kept: Vec<usize>,
    /// Set when `C` was outside `1..N` and the data passed through unchanged.
    pub passthrough: bool,
}

impl FilterStats {
    pub fn removed(&self) -> Vec<usize> {
        let mut keep = self.kept.iter().peekable();
        (0..self.metrics.len())
            .filter(|i| {
                if keep.peek() == Some(&i) {
                    keep.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    /// CSV with header `index,E,U,M,V,S,kept`; `index` is 0-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,E,U,M,V,S,kept\n");
        let mut keep = self.kept.iter().peekable();
        for (i, m) in self.metrics.iter().enumerate() {
            let kept = keep.peek() == Some(&&i);
            if kept {
                keep.next();
            }
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{}",
                m.entropy, m.unique, m.mean, m.variance, self.score[i], kept as u8
            );
        }
        out
    }
}

/// `(x - mean) / std` with the sample standard deviation; all zeros when the
/// spread vanishes. With `abs`, the deviation is taken in absolute value.
fn zscores(x: &[f64], abs: bool) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    // a spread at rounding level is treated as no spread
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return vec![0.0; x.len()];
    }
    x.iter()
        .map(|v| {
            let d = v - mean;
            if abs { d.abs() / sd } else { d / sd }
        })
        .collect()
}

/// Drops `c` rows. Returns the data unchanged (with `passthrough` set) unless `0 < c < N`.
pub fn rcr_ef(y: &ObsMatrix, c: usize, opts: FilterOptions) -> (ObsMatrix, FilterStats) {
    let n = y.n_seq();
    let metrics: Vec<RowMetrics> = if y.len() == 0 {
        vec![
            RowMetrics {
                entropy: 0.0,
                unique: 0,
                mean: 0.0,
                variance: 0.0
            };
            n
        ]
    } else {
        y.rows().map(row_metrics).collect()
    };
    let col = |f: fn(&RowMetrics) -> f64| metrics.iter().map(f).collect::<Vec<f64>>();
    let z_entropy = zscores(&col(|m| m.entropy), false);
    let z_unique = zscores(&col(|m| m.unique as f64), false);
    let z_mean = zscores(&col(|m| m.mean), true);
    let z_var = zscores(&col(|m| m.variance), true);
    let score: Vec<f64> = (0..n)
        .map(|i| -z_entropy[i] - z_unique[i] + W_MEAN * z_mean[i] + W_VAR * z_var[i])
        .collect();

    let passthrough = !(c > 0 && c < n);
    let kept: Vec<usize> = if passthrough {
        if c != 0 {
            log::warn!("filter count {c} not below the row count {n}; data left unchanged");
        }
        (0..n).collect()
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        // stable sort keeps lower indices first among equal scores
        if opts.keep_high_s {
            order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
        } else {
            order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
        }
        order.truncate(n - c);
        order.sort_unstable();
        order
    };
    let filtered = if passthrough { y.clone() } else { y.select_rows(&kept) };
    let stats = FilterStats {
        metrics,
        z_entropy,
        z_unique,
        z_mean,
        z_var,
        score,
        kept,
        passthrough,
    };
    (filtered, stats)
}
