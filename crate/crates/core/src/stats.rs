//! Interval estimates and goodness-of-fit helpers shared by the experiments.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// A point estimate with a two-sided interval at `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub replicas: usize,
}

impl EstimateWithCI {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.low <= other.high && other.low <= self.high
    }
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Two-sided critical value, e.g. 2.5758 for 99%.
pub fn z_for_level(level: f64) -> f64 {
    normal_quantile(0.5 + 0.5 * level)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: usize, trials: usize, level: f64) -> EstimateWithCI {
    if trials == 0 {
        return EstimateWithCI {
            estimate: f64::NAN,
            low: 0.0,
            high: 1.0,
            level,
            replicas: 0,
        };
    }
    let z = z_for_level(level);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    EstimateWithCI {
        estimate: p,
        low: (center - spread).max(0.0),
        high: (center + spread).min(1.0),
        level,
        replicas: trials,
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_mean<R: Rng + ?Sized>(
    values: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> EstimateWithCI {
    let n = values.len();
    let estimate = mean(values);
    if n < 2 {
        return EstimateWithCI {
            estimate,
            low: estimate,
            high: estimate,
            level,
            replicas: n,
        };
    }
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..n {
                s += values[rng.random_range(0..n)];
            }
            s / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    EstimateWithCI {
        estimate,
        low: percentile_sorted(&means, alpha / 2.0),
        high: percentile_sorted(&means, 1.0 - alpha / 2.0),
        level,
        replicas: n,
    }
}

/// Total variation distance between two probability vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// TV distance between the empirical law of `counts` and `target`, with a
/// bootstrap half-width: the `level` quantile of the TV distance between a
/// multinomial resample and the empirical law itself.
pub fn tv_with_bootstrap<R: Rng + ?Sized>(
    counts: &[usize],
    target: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> EstimateWithCI {
    let total: usize = counts.iter().sum();
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let estimate = tv_distance(&empirical, target);
    let cumulative: Vec<usize> = counts
        .iter()
        .scan(0, |acc, &c| {
            *acc += c;
            Some(*acc)
        })
        .collect();
    let mut deviations: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut resampled = vec![0usize; counts.len()];
            for _ in 0..total {
                let u = rng.random_range(0..total);
                let slot = cumulative.partition_point(|&c| c <= u);
                resampled[slot] += 1;
            }
            let law: Vec<f64> = resampled.iter().map(|&c| c as f64 / total as f64).collect();
            tv_distance(&law, &empirical)
        })
        .collect();
    deviations.sort_by(f64::total_cmp);
    let half = percentile_sorted(&deviations, level);
    EstimateWithCI {
        estimate,
        low: (estimate - half).max(0.0),
        high: (estimate + half).min(1.0),
        level,
        replicas: total,
    }
}

/// Pearson chi-square statistic and upper-tail p-value against `expected`
/// probabilities (zero-probability cells must have zero counts).
pub fn chi_square(counts: &[usize], expected: &[f64]) -> (f64, f64) {
    let total: usize = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&obs, &p) in counts.iter().zip(expected) {
        if p <= 0.0 {
            continue;
        }
        let e = p * total as f64;
        stat += (obs as f64 - e).powi(2) / e;
        cells += 1;
    }
    let df = (cells.max(2) - 1) as f64;
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    (stat, dist.sf(stat))
}

/// Pearson test of independence for an `r x c` contingency table, with
/// `(r-1)(c-1)` degrees of freedom.
pub fn chi_square_independence(table: &[Vec<usize>]) -> (f64, f64) {
    let total: usize = table.iter().flatten().sum();
    let cols = table.first().map_or(0, |r| r.len());
    let row_sums: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let e = (row_sums[i] * col_sums[j]) as f64 / total as f64;
            if e > 0.0 {
                stat += (obs as f64 - e).powi(2) / e;
            }
        }
    }
    let df = ((table.len().max(2) - 1) * (cols.max(2) - 1)) as f64;
    (stat, ChiSquared::new(df).expect("positive degrees of freedom").sf(stat))
}

/// Replica count suggested by the Chernoff bound
/// `P(X > (1+d) mu) <= exp(-d^2 mu / 4)`: with `mu = N p` and `d = h / p`,
/// both tails stay below `(1 - level) / 2` once `N >= 4 p ln(2/(1-level)) / h^2`.
pub fn chernoff_replicas(p_guess: f64, half_width: f64, level: f64) -> usize {
    let p = p_guess.clamp(1e-12, 1.0);
    (4.0 * p * (2.0 / (1.0 - level)).ln() / (half_width * half_width)).ceil() as usize
}

/// Least-squares slope of y on x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
