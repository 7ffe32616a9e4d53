use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::ShotRecord;
use crate::error::{Error, Result};
use crate::rng::shot_rng;
use crate::stats::bootstrap::{percentile, BootstrapConfig, Compressed, COVERAGE};
use crate::stats::fit::fit_exponential;
use crate::stats::Estimate;

/// Shots taken at one source strength in retrieval mode.
#[derive(Debug, Clone, Copy)]
pub struct RetrievalPoint<'a> {
    /// Configured mean source photon number; zero marks the reference point.
    pub nominal_source: f64,
    pub records: &'a [ShotRecord],
}

/// Which shots contribute gate counts to the retrieval fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetrievalSelection {
    /// Every shot, as in a measurement.
    AllShots,
    /// Only shots with exactly one stored excitation. Shots with several
    /// excitations scatter less per photon and bias the decay constant up.
    SingleExcitation,
}

impl RetrievalSelection {
    fn keeps(self, r: &ShotRecord) -> bool {
        match self {
            Self::AllShots => true,
            Self::SingleExcitation => r.n_stored == 1,
        }
    }
}

/// Gate retrieval versus source strength with its exponential fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalCurve {
    /// Measured `<M_s>|n_g=0` before outcoupling.
    pub strengths_intracavity: Vec<f64>,
    /// Same, outside the cavity.
    pub strengths_outside: Vec<f64>,
    /// Background-subtracted gate counts relative to the zero-source point.
    pub fractions: Vec<f64>,
    pub m_s0_intracavity: Estimate,
    pub m_s0_outside: Estimate,
    pub fit_amplitude: f64,
    pub residuals: Vec<f64>,
}

fn gate_free_mean(records: &[ShotRecord], transmitted: impl Fn(&ShotRecord) -> u64) -> f64 {
    let (sum, n) = records
        .iter()
        .filter(|r| r.n_stored == 0)
        .fold((0u64, 0u64), |(s, n), r| (s + transmitted(r), n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

fn mean_of(rows: &[(u64, u64)]) -> f64 {
    let n: u64 = rows.iter().map(|r| r.1).sum();
    rows.iter().map(|&(v, c)| (v * c) as f64).sum::<f64>() / n.max(1) as f64
}

fn fractions(gate_means: &[f64], reference: usize, background: f64) -> Option<Vec<f64>> {
    let denom = gate_means[reference] - background;
    (denom > 0.0).then(|| gate_means.iter().map(|g| (g - background) / denom).collect())
}

/// Normalizes gate detections to the zero-source point and fits
/// `A exp(-M / M_s0)` in intracavity and in outside photon units.
/// `gate_background` is the mean dark count per shot on the gate detector.
pub fn retrieval_curve(
    points: &[RetrievalPoint<'_>],
    selection: RetrievalSelection,
    gate_background: f64,
    boot: BootstrapConfig,
) -> Result<RetrievalCurve> {
    if points.iter().any(|p| p.records.is_empty()) {
        return Err(Error::Empty("retrieval point"));
    }
    let reference = points
        .iter()
        .position(|p| p.nominal_source == 0.0)
        .ok_or_else(|| Error::Fit("retrieval curve needs a zero-source reference point".into()))?;
    let strengths_intracavity: Vec<f64> = points
        .iter()
        .map(|p| gate_free_mean(p.records, |r| r.source_transmitted_intracavity))
        .collect();
    let strengths_outside: Vec<f64> = points
        .iter()
        .map(|p| gate_free_mean(p.records, |r| r.source_transmitted_outside))
        .collect();
    let gate_counts: Vec<Compressed<u64>> = points
        .iter()
        .map(|p| Compressed::from_items(p.records.iter().filter(|r| selection.keeps(r)).map(|r| r.detected_gate)))
        .collect();
    if gate_counts.iter().any(|c| c.rows.is_empty()) {
        return Err(Error::Empty("selected retrieval shots"));
    }
    let gate_means: Vec<f64> = gate_counts.iter().map(|c| mean_of(&c.rows)).collect();
    let fractions =
        fractions(&gate_means, reference, gate_background).ok_or(Error::ZeroDenominator("retrieval normalization"))?;
    let fit_in = fit_exponential(&strengths_intracavity, &fractions)?;
    let fit_out = fit_exponential(&strengths_outside, &fractions)?;

    let mut decays: Vec<(f64, f64)> = (0..boot.resamples as u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = shot_rng(boot.seed, i);
            let means: Vec<f64> = gate_counts.iter().map(|c| mean_of(&c.resample(&mut rng))).collect();
            let f = self::fractions(&means, reference, gate_background)?;
            let a = fit_exponential(&strengths_intracavity, &f).ok()?.decay;
            let b = fit_exponential(&strengths_outside, &f).ok()?.decay;
            Some((a, b))
        })
        .collect();
    let interval = |value: f64, mut xs: Vec<f64>| {
        if xs.len() < boot.resamples / 2 || xs.is_empty() {
            return Estimate::exact(value);
        }
        xs.sort_by(f64::total_cmp);
        let tail = (1.0 - COVERAGE) / 2.0;
        Estimate {
            value,
            err_low: (value - percentile(&xs, tail)).max(0.0),
            err_high: (percentile(&xs, 1.0 - tail) - value).max(0.0),
        }
    };
    let (inside, outside): (Vec<f64>, Vec<f64>) = decays.drain(..).unzip();
    Ok(RetrievalCurve {
        m_s0_intracavity: interval(fit_in.decay, inside),
        m_s0_outside: interval(fit_out.decay, outside),
        fit_amplitude: fit_in.amplitude,
        residuals: fit_in.residuals,
        strengths_intracavity,
        strengths_outside,
        fractions,
    })
}
