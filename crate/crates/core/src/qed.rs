//! Closed-form cavity-QED quantities: single-atom extinction, free-space
//! scattering, the driven-cavity transmission spectrum, and averaging of
//! the cooperativity over the atomic distribution.
//!
//! Cooperativities are dimensionless, detunings and linewidths are angular
//! frequencies in rad/s.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::units::{mhz_to_angular, us_to_seconds};

/// Single-mode optical resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Full linewidth (rad/s).
    pub kappa: f64,
    /// Mirror transmission of the output coupler.
    pub mirror_transmission: f64,
    /// Scattering and absorption loss per mirror.
    pub mirror_loss: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            kappa: mhz_to_angular(0.15),
            mirror_transmission: 66.0e-6,
            mirror_loss: 34.0e-6,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.kappa > 0.0 && self.kappa.is_finite(),
            "CavityParams.kappa",
            "must be positive",
        )?;
        ensure(
            self.mirror_transmission > 0.0 && self.mirror_transmission.is_finite(),
            "CavityParams.mirror_transmission",
            "must be positive",
        )?;
        ensure(
            self.mirror_loss >= 0.0 && self.mirror_loss.is_finite(),
            "CavityParams.mirror_loss",
            "must be non-negative",
        )
    }

    /// Probability that a photon leaving the cavity mode exits through the
    /// output mirror rather than being lost.
    pub fn outcoupling(&self) -> f64 {
        self.mirror_transmission / (self.mirror_transmission + self.mirror_loss)
    }
}

/// Atomic ensemble parameters on the cavity transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    /// Excited-state linewidth (rad/s).
    pub gamma: f64,
    /// Cooperativity of a two-level atom at a cavity antinode.
    pub eta0: f64,
    /// Lifetime of the collective spin excitation (s).
    pub tau_spinwave: f64,
    /// Optical depth of the ensemble for the gate light. Informational.
    pub optical_depth: f64,
}

impl Default for AtomParams {
    fn default() -> Self {
        Self {
            gamma: mhz_to_angular(5.2),
            eta0: 8.6,
            tau_spinwave: us_to_seconds(2.1),
            optical_depth: 0.9,
        }
    }
}

impl AtomParams {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.gamma > 0.0 && self.gamma.is_finite(),
            "AtomParams.gamma",
            "must be positive",
        )?;
        ensure(
            self.eta0 >= 0.0 && self.eta0.is_finite(),
            "AtomParams.eta0",
            "must be non-negative",
        )?;
        ensure(
            self.tau_spinwave > 0.0 && self.tau_spinwave.is_finite(),
            "AtomParams.tau_spinwave",
            "must be positive",
        )?;
        ensure(
            self.optical_depth >= 0.0 && self.optical_depth.is_finite(),
            "AtomParams.optical_depth",
            "must be non-negative",
        )
    }
}

/// Distribution of the single-atom cooperativity seen by a stored excitation.
///
/// With `standing_wave` on, the atom sits at a uniformly random position
/// along the cavity axis and couples with `eta0 * cos^2(kz)`; the
/// `geometric_weight` absorbs polarization and gate-beam overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CooperativityModel {
    pub eta0: f64,
    pub standing_wave: bool,
    pub geometric_weight: f64,
}

/// Mean cooperativity of the calibrated standing-wave model.
pub const CALIBRATED_MEAN_ETA: f64 = 2.8;

impl Default for CooperativityModel {
    /// Standing-wave model whose weight is chosen so that the plain average
    /// of the cooperativity equals [`CALIBRATED_MEAN_ETA`].
    fn default() -> Self {
        let eta0 = AtomParams::default().eta0;
        Self {
            eta0,
            standing_wave: true,
            geometric_weight: 2.0 * CALIBRATED_MEAN_ETA / eta0,
        }
    }
}

impl CooperativityModel {
    /// Every atom couples with the same cooperativity.
    pub fn constant(eta: f64) -> Self {
        Self {
            eta0: eta,
            standing_wave: false,
            geometric_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.eta0 >= 0.0 && self.eta0.is_finite(),
            "CooperativityModel.eta0",
            "must be non-negative",
        )?;
        ensure(
            self.geometric_weight > 0.0 && self.geometric_weight <= 1.0,
            "CooperativityModel.geometric_weight",
            "must lie in (0, 1]",
        )
    }

    /// Largest cooperativity the model can produce.
    pub fn max_eta(&self) -> f64 {
        self.eta0 * self.geometric_weight
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            field: "cooperativity",
            reason: format!("must be finite and non-negative, got {eta}"),
        })
    }
}

/// On-resonance transmission of the cavity with one resonant atom of
/// cooperativity `eta`, relative to the empty cavity: `(1 + eta)^-2`.
pub fn extinction(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok((1.0 + eta).powi(-2))
}

/// Probability that a resonant source photon is scattered into free space by
/// an atom of cooperativity `eta` under continuous cavity driving:
/// `2 eta / (1 + eta)^2`. Peaks at 1/2 for `eta = 1`.
pub fn free_space_scatter_prob(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(2.0 * eta / (1.0 + eta).powi(2))
}

/// An atom in the cavity-coupled state, blocking the resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blocker {
    pub eta: f64,
    /// Detuning of the atomic transition from the source light (rad/s).
    pub detuning: f64,
}

impl Blocker {
    pub fn resonant(eta: f64) -> Self {
        Self { eta, detuning: 0.0 }
    }
}

/// Per-photon outcome probabilities for a source photon that would be
/// transmitted by the empty, resonant cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityResponse {
    pub transmission: f64,
    /// Free-space scattering probability contributed by each blocker.
    pub scattering: Vec<f64>,
}

impl CavityResponse {
    pub fn total_scattering(&self) -> f64 {
        self.scattering.iter().sum()
    }

    /// Photons neither transmitted nor scattered are reflected.
    pub fn reflection(&self) -> f64 {
        (1.0 - self.transmission - self.total_scattering()).max(0.0)
    }
}

/// Steady-state response of the driven cavity with a set of blocking atoms.
///
/// The normalized intracavity amplitude is `1 / (1 + 2i delta/kappa + sum_j chi_j)`
/// with atomic susceptibility `chi_j = eta_j / (1 + 2i Delta_j/Gamma)`.
/// Transmission is its squared modulus; atom `j` scatters with
/// `2 eta_j / (1 + (2 Delta_j/Gamma)^2)` times the same factor.
pub fn cavity_response(
    delta: f64,
    blockers: &[Blocker],
    cavity: &CavityParams,
    atoms: &AtomParams,
) -> Result<CavityResponse> {
    let mut denom = Complex64::new(1.0, 2.0 * delta / cavity.kappa);
    for b in blockers {
        check_eta(b.eta)?;
        denom += b.eta / Complex64::new(1.0, 2.0 * b.detuning / atoms.gamma);
    }
    let intensity = 1.0 / denom.norm_sqr();
    let scattering = blockers
        .iter()
        .map(|b| {
            let y = 2.0 * b.detuning / atoms.gamma;
            2.0 * b.eta / (1.0 + y * y) * intensity
        })
        .collect();
    Ok(CavityResponse {
        transmission: intensity,
        scattering,
    })
}

/// Cavity transmission at source detuning `delta`, normalized to the empty
/// resonant cavity. Blockers add their susceptibilities to the same mode, so
/// on resonance this equals `extinction(sum of eta)`.
pub fn cavity_transmission_spectrum(
    delta: f64,
    blockers: &[Blocker],
    cavity: &CavityParams,
    atoms: &AtomParams,
) -> Result<f64> {
    cavity_response(delta, blockers, cavity, atoms).map(|r| r.transmission)
}

/// Draws one cooperativity from `model`.
pub fn sample_cooperativity<R: Rng + ?Sized>(model: &CooperativityModel, rng: &mut R) -> f64 {
    let base = model.eta0 * model.geometric_weight;
    if model.standing_wave {
        let phase: f64 = rng.random_range(0.0..PI);
        let c = phase.cos();
        base * c * c
    } else {
        base
    }
}

/// Averages of the cooperativity distribution that reproduce, respectively,
/// the mean coupling, the mean extinction, and the mean scattering
/// probability when substituted for a single fixed cooperativity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCooperativities {
    pub mean: f64,
    pub extinction: f64,
    pub scattering: f64,
}

pub const MIN_AVERAGING_SAMPLES: usize = 10_000;

/// Monte-Carlo averages over [`sample_cooperativity`].
pub fn effective_cooperativities<R: Rng + ?Sized>(
    model: &CooperativityModel,
    n_samples: usize,
    rng: &mut R,
) -> Result<EffectiveCooperativities> {
    model.validate()?;
    if n_samples < MIN_AVERAGING_SAMPLES {
        return Err(Error::Precision {
            required: MIN_AVERAGING_SAMPLES,
            got: n_samples,
        });
    }
    let (mut sum_eta, mut sum_ext, mut sum_scatter) = (0.0, 0.0, 0.0);
    for _ in 0..n_samples {
        let eta = sample_cooperativity(model, rng);
        let inv = 1.0 / (1.0 + eta);
        sum_eta += eta;
        sum_ext += inv * inv;
        sum_scatter += 2.0 * eta * inv * inv;
    }
    let n = n_samples as f64;
    Ok(effective_from_averages(sum_eta / n, sum_ext / n, sum_scatter / n))
}

/// Inverts the averaged extinction and scattering probability back to
/// cooperativities.
pub fn effective_from_averages(mean: f64, mean_extinction: f64, mean_scatter: f64) -> EffectiveCooperativities {
    let extinction = mean_extinction.powf(-0.5) - 1.0;
    EffectiveCooperativities {
        mean,
        extinction: extinction.max(0.0),
        scattering: invert_scatter_prob(mean_scatter, mean >= 1.0),
    }
}

/// Solves `2x/(1+x)^2 = p`. It has two roots with product 1;
/// `upper` selects the one at or above 1.
pub fn invert_scatter_prob(p: f64, upper: bool) -> f64 {
    if p <= 0.0 {
        return if upper { f64::INFINITY } else { 0.0 };
    }
    let half_b = 1.0 / p - 1.0;
    let disc = (half_b * half_b - 1.0).max(0.0).sqrt();
    if upper {
        half_b + disc
    } else {
        // the smaller root as 1/(larger root) avoids cancellation
        1.0 / (half_b + disc)
    }
}
