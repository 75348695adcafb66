//! Estimates with standard errors, batch means, bootstrap and small fits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Purpose};

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    /// `self - other` with errors added in quadrature.
    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate::new(self.value - other.value, self.se.hypot(other.se))
    }

    /// Distance to `target` in units of the standard error. Infinite when the
    /// error is zero and the values differ.
    pub fn z_to(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.se
        }
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.6} +/- {:.6}", self.value, self.se)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean with the standard error of independent draws.
pub fn mean_se(xs: &[f64]) -> Estimate {
    Estimate::new(mean(xs), (variance(xs) / xs.len().max(1) as f64).sqrt())
}

/// Mean of a correlated series with a batch-means standard error.
pub fn batch_means(xs: &[f64], batches: usize) -> Estimate {
    let batches = batches.clamp(1, xs.len().max(1));
    let len = xs.len() / batches;
    if len == 0 || batches < 2 {
        return Estimate::new(mean(xs), 0.0);
    }
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * len..(b + 1) * len])).collect();
    Estimate::new(mean(xs), (variance(&means) / batches as f64).sqrt())
}

/// Bootstrap standard error of `stat` over resamples of `items`.
pub fn bootstrap_se<T, F>(items: &[T], resamples: usize, seed: u64, stat: F) -> f64
where
    F: Fn(&[&T]) -> f64,
{
    if items.len() < 2 || resamples < 2 {
        return 0.0;
    }
    let mut rng = stream(seed, Purpose::Bootstrap, &[items.len() as i64]);
    let mut draw: Vec<&T> = Vec::with_capacity(items.len());
    let values: Vec<f64> = (0..resamples)
        .map(|_| {
            draw.clear();
            for _ in 0..items.len() {
                draw.push(&items[rng.random_range(0..items.len())]);
            }
            stat(&draw)
        })
        .collect();
    variance(&values).sqrt()
}

/// Ratio of sums with a bootstrap standard error over the pairs.
pub fn pooled_ratio(pairs: &[(f64, f64)], resamples: usize, seed: u64) -> Estimate {
    let ratio = |ps: &[&(f64, f64)]| {
        let (num, den) = ps.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        if den > 0.0 {
            num / den
        } else {
            f64::NAN
        }
    };
    let all: Vec<&(f64, f64)> = pairs.iter().collect();
    Estimate::new(ratio(&all), bootstrap_se(pairs, resamples, seed, ratio))
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    d
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Exponent of a power law `y ~ x^k` fitted in log-log space.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}
