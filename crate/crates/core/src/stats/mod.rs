//! Estimators that turn shot records into the transistor observables.

use serde::{Deserialize, Serialize};

pub mod bootstrap;
pub mod fit;
pub mod g2;
pub mod gain;
pub mod histogram;
pub mod retrieval;
pub mod spectrum;

pub use bootstrap::{bootstrap, BootstrapConfig, Compressed};
pub use fit::{fit_exponential, fit_linear, fit_saturation, ExponentialFit, LinearFit, SaturationFit};
pub use g2::{g2_cross, CrossCorrelation};
pub use gain::{gain, Classifier, GainEstimate, PhotonUnits};
pub use histogram::{build_histogram, ComponentSplit, CountBinning, TransmissionHistogram};
pub use retrieval::{retrieval_curve, RetrievalCurve, RetrievalPoint, RetrievalSelection};
pub use spectrum::{average_spectrum, contrast_bound, switching_contrast, Spectrum};

/// A value with a (possibly asymmetric) one-sigma interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err_low: f64,
    pub err_high: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            err_low: 0.0,
            err_high: 0.0,
        }
    }

    pub fn symmetric(value: f64, sigma: f64) -> Self {
        Self {
            value,
            err_low: sigma,
            err_high: sigma,
        }
    }

    /// Half-width of the interval.
    pub fn sigma(&self) -> f64 {
        0.5 * (self.err_low + self.err_high)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            err_low: self.err_low * factor,
            err_high: self.err_high * factor,
        }
    }
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_sem(values: impl IntoIterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    if n < 2 {
        return (mean, 0.0, n);
    }
    let var = m2 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}
