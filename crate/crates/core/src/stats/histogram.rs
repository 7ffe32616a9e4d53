use serde::{Deserialize, Serialize};

use crate::engine::ShotRecord;
use crate::error::{Error, Result};

/// Minimum number of shots for a histogram.
pub const MIN_HISTOGRAM_SHOTS: usize = 1000;

/// Bins of detected source counts. The last bin also collects overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBinning {
    pub bin_width: u64,
    pub n_bins: usize,
}

impl CountBinning {
    pub fn unit(n_bins: usize) -> Self {
        Self { bin_width: 1, n_bins }
    }

    fn bin(&self, count: u64) -> usize {
        ((count / self.bin_width) as usize).min(self.n_bins - 1)
    }
}

/// High- and low-transmission components of one detuning column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSplit {
    pub high_mean: f64,
    pub low_mean: f64,
    pub high_count: usize,
    pub low_count: usize,
    /// Counts at or below the threshold were assigned to the low component.
    pub threshold: Option<u64>,
}

impl ComponentSplit {
    /// High-to-low ratio of the component means.
    pub fn extinction_factor(&self) -> f64 {
        self.high_mean / self.low_mean
    }

    fn from_labels(
        records: &[ShotRecord],
        is_low: impl Fn(&ShotRecord) -> bool,
        threshold: Option<u64>,
    ) -> Result<Self> {
        let (mut hs, mut hn, mut ls, mut ln) = (0u64, 0usize, 0u64, 0usize);
        for r in records {
            if is_low(r) {
                ls += r.detected_source;
                ln += 1;
            } else {
                hs += r.detected_source;
                hn += 1;
            }
        }
        if hn == 0 || ln == 0 {
            return Err(Error::Empty("histogram component"));
        }
        Ok(Self {
            high_mean: hs as f64 / hn as f64,
            low_mean: ls as f64 / ln as f64,
            high_count: hn,
            low_count: ln,
            threshold,
        })
    }
}

/// Components labelled by the simulated stored photon number.
pub fn split_by_truth(records: &[ShotRecord]) -> Result<ComponentSplit> {
    ComponentSplit::from_labels(records, ShotRecord::gate_present, None)
}

/// Components separated at the valley of the count histogram, without
/// access to the stored photon number.
pub fn split_by_threshold(records: &[ShotRecord]) -> Result<ComponentSplit> {
    let counts: Vec<u64> = records.iter().map(|r| r.detected_source).collect();
    let t = valley_threshold(&counts).ok_or(Error::Empty("no valley in a unimodal histogram"))?;
    ComponentSplit::from_labels(records, |r| r.detected_source <= t, Some(t))
}

/// Threshold at the least-populated count between the two class means of an
/// Otsu split. Returns `None` when the counts take fewer than two values.
pub fn valley_threshold(counts: &[u64]) -> Option<u64> {
    let max = *counts.iter().max()?;
    let mut hist = vec![0f64; max as usize + 1];
    for &c in counts {
        hist[c as usize] += 1.0;
    }
    if hist.iter().filter(|&&h| h > 0.0).count() < 2 {
        return None;
    }
    let total: f64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(k, h)| k as f64 * h).sum();
    let (mut w0, mut s0) = (0.0, 0.0);
    let mut best = (0usize, -1.0f64);
    for (k, &h) in hist.iter().enumerate().take(hist.len() - 1) {
        w0 += h;
        s0 += k as f64 * h;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let between = w0 * w1 * (s0 / w0 - (sum_all - s0) / w1).powi(2);
        if between > best.1 {
            best = (k, between);
        }
    }
    let otsu = best.0;
    let lower: f64 =
        hist[..=otsu].iter().enumerate().map(|(k, h)| k as f64 * h).sum::<f64>() / hist[..=otsu].iter().sum::<f64>();
    let upper: f64 = hist[otsu + 1..]
        .iter()
        .enumerate()
        .map(|(k, h)| (k + otsu + 1) as f64 * h)
        .sum::<f64>()
        / hist[otsu + 1..].iter().sum::<f64>();
    // three-bin smoothing before looking for the minimum
    let smooth = |k: usize| {
        let lo = k.saturating_sub(1);
        let hi = (k + 1).min(hist.len() - 1);
        hist[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
    };
    let (from, to) = (lower.ceil() as usize, upper.floor() as usize);
    if from >= to {
        return Some(otsu as u64);
    }
    let valley = (from..to).min_by(|&a, &b| smooth(a).total_cmp(&smooth(b)).then(a.cmp(&b)))?;
    Some(valley as u64)
}

/// Occurrence rates of detected source counts per detuning column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionHistogram {
    /// rad/s
    pub detunings: Vec<f64>,
    pub binning: CountBinning,
    /// `rates[column][bin]`; every column sums to one.
    pub rates: Vec<Vec<f64>>,
    pub shots_per_column: Vec<usize>,
    /// Components of the column closest to resonance, by stored photon number.
    pub truth_split: Option<ComponentSplit>,
    /// Same column split at the histogram valley.
    pub threshold_split: Option<ComponentSplit>,
}

impl TransmissionHistogram {
    /// Extinction factor from the ground-truth split of the resonant column.
    pub fn extinction_factor(&self) -> Option<f64> {
        self.truth_split.map(|s| s.extinction_factor())
    }
}

pub fn build_histogram(columns: &[(f64, &[ShotRecord])], binning: CountBinning) -> Result<TransmissionHistogram> {
    if binning.bin_width == 0 || binning.n_bins < 2 {
        return Err(Error::Binning(format!(
            "bin width {} with {} bins",
            binning.bin_width, binning.n_bins
        )));
    }
    let total: usize = columns.iter().map(|(_, r)| r.len()).sum();
    if total < MIN_HISTOGRAM_SHOTS {
        return Err(Error::Precision {
            required: MIN_HISTOGRAM_SHOTS,
            got: total,
        });
    }
    let mut rates = Vec::with_capacity(columns.len());
    let mut shots_per_column = Vec::with_capacity(columns.len());
    for (_, records) in columns {
        if records.is_empty() {
            return Err(Error::Empty("histogram column"));
        }
        let mut column = vec![0.0; binning.n_bins];
        for r in *records {
            column[binning.bin(r.detected_source)] += 1.0;
        }
        let n = records.len() as f64;
        column.iter_mut().for_each(|c| *c /= n);
        rates.push(column);
        shots_per_column.push(records.len());
    }
    let resonant = columns
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .map(|(_, r)| *r)
        .unwrap_or(&[]);
    Ok(TransmissionHistogram {
        detunings: columns.iter().map(|(d, _)| *d).collect(),
        binning,
        rates,
        shots_per_column,
        truth_split: split_by_truth(resonant).ok(),
        threshold_split: split_by_threshold(resonant).ok(),
    })
}
