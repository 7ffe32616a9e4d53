//! Percentile bootstrap over compressed data.
//!
//! Shot data take few distinct values, so a sample is stored as distinct rows
//! with multiplicities. Resampling `n` rows with replacement is then one
//! multinomial draw over the rows, which is exact and costs O(rows) instead
//! of O(n) per resample.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::shot_rng;
use crate::sampling::binomial;
use crate::stats::Estimate;

/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 1000;
/// Central coverage of the reported interval (one standard deviation).
pub const COVERAGE: f64 = 0.682_689_492_137_085_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            seed: 0x5eed_b007,
        }
    }
}

/// Distinct rows of a sample with their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct Compressed<T> {
    pub rows: Vec<(T, u64)>,
}

impl<T: Ord + Copy> Compressed<T> {
    pub fn from_items(items: impl IntoIterator<Item = T>) -> Self {
        let mut counts = BTreeMap::new();
        for item in items {
            *counts.entry(item).or_insert(0u64) += 1;
        }
        Self {
            rows: counts.into_iter().collect(),
        }
    }
}

impl<T> Compressed<T> {
    pub fn total(&self) -> u64 {
        self.rows.iter().map(|(_, c)| c).sum()
    }
}

impl<T: Copy> Compressed<T> {
    pub(crate) fn resample(&self, rng: &mut crate::rng::SimRng) -> Vec<(T, u64)> {
        let mut remaining = self.total();
        let mut mass = remaining as f64;
        let mut out = Vec::with_capacity(self.rows.len());
        for &(row, count) in &self.rows {
            let drawn = if mass <= count as f64 {
                remaining
            } else {
                binomial(rng, remaining, count as f64 / mass)
            };
            out.push((row, drawn));
            remaining -= drawn;
            mass -= count as f64;
        }
        out
    }
}

pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Point estimate on the full data plus a percentile interval over
/// resamples. Resamples where the statistic is undefined are dropped.
pub fn bootstrap<T, F>(data: &Compressed<T>, config: BootstrapConfig, statistic: F) -> Result<Estimate>
where
    T: Copy + Send + Sync,
    F: Fn(&[(T, u64)]) -> Option<f64> + Send + Sync,
{
    let value = statistic(&data.rows).ok_or(Error::Empty("bootstrap statistic on full data"))?;
    if config.resamples == 0 {
        return Ok(Estimate::exact(value));
    }
    let mut stats: Vec<f64> = (0..config.resamples as u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = shot_rng(config.seed, i);
            statistic(&data.resample(&mut rng))
        })
        .filter(|v| v.is_finite())
        .collect();
    if stats.len() < config.resamples / 2 {
        return Err(Error::Empty("bootstrap resamples with a defined statistic"));
    }
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - COVERAGE) / 2.0;
    let low = percentile(&stats, tail);
    let high = percentile(&stats, 1.0 - tail);
    Ok(Estimate {
        value,
        err_low: (value - low).max(0.0),
        err_high: (high - value).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(rows: &[(u64, u64)]) -> Option<f64> {
        let n: u64 = rows.iter().map(|r| r.1).sum();
        (n > 0).then(|| rows.iter().map(|&(v, c)| (v * c) as f64).sum::<f64>() / n as f64)
    }

    #[test]
    fn resample_preserves_size() {
        let data = Compressed::from_items([1u64, 1, 2, 3, 3, 3, 7]);
        let mut rng = shot_rng(1, 0);
        for _ in 0..100 {
            let r = data.resample(&mut rng);
            assert_eq!(r.iter().map(|x| x.1).sum::<u64>(), 7);
        }
    }

    #[test]
    fn interval_matches_standard_error_of_mean() {
        // 10^4 Bernoulli(0.3) draws: SEM = sqrt(0.21 / 10^4) = 0.00458
        let data = Compressed {
            rows: vec![(0u64, 7000), (1u64, 3000)],
        };
        let est = bootstrap(&data, BootstrapConfig::default(), mean).unwrap();
        assert_eq!(est.value, 0.3);
        let sem = (0.21f64 / 1.0e4).sqrt();
        assert!((est.err_low - sem).abs() < 0.15 * sem, "{est:?}");
        assert!((est.err_high - sem).abs() < 0.15 * sem, "{est:?}");
    }

    #[test]
    fn identical_data_has_zero_width() {
        let data = Compressed::from_items([4u64; 50]);
        let est = bootstrap(&data, BootstrapConfig::default(), mean).unwrap();
        assert_eq!((est.value, est.err_low, est.err_high), (4.0, 0.0, 0.0));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let data = Compressed::from_items((0..500u64).map(|i| i % 7));
        let a = bootstrap(&data, BootstrapConfig::default(), mean).unwrap();
        let b = bootstrap(&data, BootstrapConfig::default(), mean).unwrap();
        assert_eq!(a, b);
    }
}
