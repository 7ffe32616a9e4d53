use serde::{Deserialize, Serialize};

use crate::engine::ShotRecord;
use crate::error::{Error, Result};
use crate::stats::{mean_sem, Estimate};

/// Average transmission versus source detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// rad/s
    pub detunings: Vec<f64>,
    pub mean_transmission: Vec<f64>,
    pub sem: Vec<f64>,
}

/// Mean detected source counts per detuning group, normalized by
/// `reference`, the mean count of the gate-free resonant run.
pub fn average_spectrum(groups: &[(f64, &[ShotRecord])], reference: f64) -> Result<Spectrum> {
    if groups.is_empty() {
        return Err(Error::Empty("spectrum groups"));
    }
    if reference.is_nan() || reference <= 0.0 {
        return Err(Error::ZeroDenominator("spectrum normalization"));
    }
    let mut spectrum = Spectrum {
        detunings: Vec::with_capacity(groups.len()),
        mean_transmission: Vec::with_capacity(groups.len()),
        sem: Vec::with_capacity(groups.len()),
    };
    for (detuning, records) in groups {
        if records.len() < 2 {
            return Err(Error::Empty("spectrum group needs at least two shots"));
        }
        let (mean, sem, _) = mean_sem(records.iter().map(|r| r.detected_source as f64));
        spectrum.detunings.push(*detuning);
        spectrum.mean_transmission.push(mean / reference);
        spectrum.sem.push(sem / reference);
    }
    Ok(spectrum)
}

/// Mean detected source counts, the usual normalization reference.
pub fn mean_detected_source(records: &[ShotRecord]) -> Result<Estimate> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    let (mean, sem, _) = mean_sem(records.iter().map(|r| r.detected_source as f64));
    Ok(Estimate::symmetric(mean, sem))
}

/// Upper bound on the switching contrast for a coherent gate with mean
/// stored photon number `stored`: only the vacuum component transmits.
pub fn contrast_bound(stored: f64) -> f64 {
    -(-stored).exp_m1()
}

/// Relative reduction of the resonant transmission caused by the gate,
/// `1 - <n_s>_gate / <n_s>_no-gate`, with first-order error propagation.
pub fn switching_contrast(with_gate: &[ShotRecord], without_gate: &[ShotRecord]) -> Result<Estimate> {
    let on = mean_detected_source(with_gate)?;
    let off = mean_detected_source(without_gate)?;
    if off.value <= 0.0 {
        return Err(Error::ZeroDenominator("switching contrast"));
    }
    let ratio = on.value / off.value;
    let sigma =
        ratio * ((on.sigma() / on.value.max(f64::MIN_POSITIVE)).powi(2) + (off.sigma() / off.value).powi(2)).sqrt();
    Ok(Estimate::symmetric(1.0 - ratio, sigma))
}
