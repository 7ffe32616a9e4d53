//! Shot-by-shot simulation of the transistor sequence: gate storage, source
//! window with collapse and optical pumping, spin-wave decay, retrieval, and
//! lossy detection.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::qed::{cavity_response, sample_cooperativity, AtomParams, Blocker, CavityParams, CooperativityModel};
use crate::rng::{shot_rng, SimRng};
use crate::sampling::{bernoulli, binomial, geometric, poisson};
use crate::units::us_to_seconds;

/// Effective cooperativity governing the transmission extinction.
pub const EFFECTIVE_ETA_EXTINCTION: f64 = 1.5;
/// Effective cooperativity governing the photon attenuation (free-space scattering).
pub const EFFECTIVE_ETA_SCATTERING: f64 = 3.3;
/// Combined storage, 1 us hold, and retrieval efficiency per incident gate photon.
pub const COMBINED_RETRIEVAL_EFFICIENCY: f64 = 0.030;

/// Durations of the experimental sequence, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSequence {
    pub storage_ramp: f64,
    pub hold_before_source: f64,
    pub source_window: f64,
    pub hold_before_retrieval: f64,
    /// Gate detection window after retrieval. Not part of the storage time.
    pub retrieval_window: f64,
}

impl Default for TimingSequence {
    /// Retrieval-mode sequence: 1 us of source light is the whole storage time.
    fn default() -> Self {
        Self {
            storage_ramp: 0.0,
            hold_before_source: 0.0,
            source_window: us_to_seconds(1.0),
            hold_before_retrieval: 0.0,
            retrieval_window: us_to_seconds(1.0),
        }
    }
}

impl TimingSequence {
    /// A sequence consisting only of a source window of `window` seconds.
    pub fn source_only(window: f64) -> Self {
        Self {
            source_window: window,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (value, field) in [
            (self.storage_ramp, "TimingSequence.storage_ramp"),
            (self.hold_before_source, "TimingSequence.hold_before_source"),
            (self.source_window, "TimingSequence.source_window"),
            (self.hold_before_retrieval, "TimingSequence.hold_before_retrieval"),
            (self.retrieval_window, "TimingSequence.retrieval_window"),
        ] {
            ensure(
                value >= 0.0 && value.is_finite(),
                field,
                "must be a non-negative duration",
            )?;
        }
        Ok(())
    }

    /// Time between storage and retrieval.
    pub fn storage_time(&self) -> f64 {
        self.storage_ramp + self.hold_before_source + self.source_window + self.hold_before_retrieval
    }
}

/// Weak coherent gate pulse and the efficiencies of mapping it into and out
/// of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePulse {
    pub mean_incident_photons: f64,
    pub storage_efficiency: f64,
    /// Probability of reading out an intact spin wave.
    pub retrieval_efficiency: f64,
}

impl Default for GatePulse {
    /// Efficiencies calibrated so that storage, a 1 us hold, and retrieval
    /// combine to [`COMBINED_RETRIEVAL_EFFICIENCY`].
    fn default() -> Self {
        let storage_efficiency = 0.15;
        let survival = (-1.0f64 / 2.1).exp();
        Self {
            mean_incident_photons: 0.0,
            storage_efficiency,
            retrieval_efficiency: COMBINED_RETRIEVAL_EFFICIENCY / (storage_efficiency * survival),
        }
    }
}

impl GatePulse {
    /// Pulse whose stored photon number has mean `stored`, keeping the
    /// default efficiencies.
    pub fn with_stored_mean(stored: f64) -> Self {
        let base = Self::default();
        Self {
            mean_incident_photons: stored / base.storage_efficiency,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.mean_incident_photons >= 0.0 && self.mean_incident_photons.is_finite(),
            "GatePulse.mean_incident_photons",
            "must be non-negative",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.storage_efficiency),
            "GatePulse.storage_efficiency",
            "must lie in [0, 1]",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.retrieval_efficiency),
            "GatePulse.retrieval_efficiency",
            "must lie in [0, 1]",
        )
    }

    pub fn mean_stored(&self) -> f64 {
        self.mean_incident_photons * self.storage_efficiency
    }
}

/// Cooperativities of one stored excitation for the two processes it
/// takes part in: blocking the transmission and scattering source light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub extinction: f64,
    pub scattering: f64,
}

impl Coupling {
    pub fn uniform(eta: f64) -> Self {
        Self {
            extinction: eta,
            scattering: eta,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            extinction: self.extinction * factor,
            scattering: self.scattering * factor,
        }
    }
}

/// How a stored excitation's coupling is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CouplingModel {
    /// One cooperativity per excitation from the position distribution,
    /// used for both extinction and scattering.
    Sampled(CooperativityModel),
    /// Fixed effective cooperativities, separately matched to the averaged
    /// extinction and to the averaged scattering probability.
    Effective { extinction: f64, scattering: f64 },
}

impl Default for CouplingModel {
    fn default() -> Self {
        Self::Effective {
            extinction: EFFECTIVE_ETA_EXTINCTION,
            scattering: EFFECTIVE_ETA_SCATTERING,
        }
    }
}

impl CouplingModel {
    pub fn constant(eta: f64) -> Self {
        Self::Sampled(CooperativityModel::constant(eta))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Sampled(model) => model.validate(),
            Self::Effective { extinction, scattering } => {
                ensure(
                    *extinction >= 0.0 && extinction.is_finite(),
                    "CouplingModel.extinction",
                    "must be non-negative",
                )?;
                ensure(
                    *scattering >= 0.0 && scattering.is_finite(),
                    "CouplingModel.scattering",
                    "must be non-negative",
                )
            }
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> Coupling {
        match self {
            Self::Sampled(model) => Coupling::uniform(sample_cooperativity(model, rng)),
            Self::Effective { extinction, scattering } => Coupling {
                extinction: *extinction,
                scattering: *scattering,
            },
        }
    }
}

/// Collective excitation left in the ensemble by the stored gate photons.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinWave {
    /// One entry per stored excitation.
    pub couplings: Vec<Coupling>,
    /// Collective phase intact: no source photon has been scattered.
    pub coherent: bool,
    /// Excitation has not dephased before retrieval.
    pub survived_decay: bool,
}

impl SpinWave {
    pub fn empty() -> Self {
        Self {
            couplings: Vec::new(),
            coherent: true,
            survived_decay: true,
        }
    }

    pub fn with_couplings(couplings: Vec<Coupling>) -> Self {
        Self {
            couplings,
            coherent: true,
            survived_decay: true,
        }
    }

    pub fn n_exc(&self) -> usize {
        self.couplings.len()
    }
}

/// Source beam applied while the gate is stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceDrive {
    /// Mean number of photons the empty resonant cavity would transmit over
    /// the window, counted before outcoupling.
    pub mean_source_photons: f64,
    /// Source detuning from the cavity resonance (rad/s). The atoms sit on
    /// cavity resonance, so this is also the atom-source detuning.
    pub detuning: f64,
}

impl Default for SourceDrive {
    fn default() -> Self {
        Self {
            mean_source_photons: 0.0,
            detuning: 0.0,
        }
    }
}

impl SourceDrive {
    pub fn resonant(mean_source_photons: f64) -> Self {
        Self {
            mean_source_photons,
            detuning: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.mean_source_photons >= 0.0 && self.mean_source_photons.is_finite(),
            "SourceDrive.mean_source_photons",
            "must be non-negative",
        )?;
        ensure(self.detuning.is_finite(), "SourceDrive.detuning", "must be finite")
    }
}

/// Optical pumping of the blocking atom into weaker-coupled sublevels,
/// triggered by free-space scattering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpingModel {
    pub hop_prob_per_scatter: f64,
    pub eta_ratio_after_hop: f64,
}

impl Default for PumpingModel {
    /// Every scattering event moves the atom to a slightly weaker-coupled
    /// sublevel; the 1% step puts the fitted gain saturation near 1000
    /// intracavity source photons in a 50 us window.
    fn default() -> Self {
        Self {
            hop_prob_per_scatter: 1.0,
            eta_ratio_after_hop: 0.99,
        }
    }
}

impl PumpingModel {
    pub fn disabled() -> Self {
        Self {
            hop_prob_per_scatter: 0.0,
            eta_ratio_after_hop: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            (0.0..=1.0).contains(&self.hop_prob_per_scatter),
            "PumpingModel.hop_prob_per_scatter",
            "must lie in [0, 1]",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.eta_ratio_after_hop),
            "PumpingModel.eta_ratio_after_hop",
            "must lie in [0, 1]",
        )
    }
}

/// Detection paths for the retrieved gate light and the transmitted source
/// light. Efficiencies exclude the cavity outcoupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    pub gate_path_efficiency: f64,
    pub source_path_efficiency: f64,
    /// Background counts per second on the gate detector.
    pub gate_dark_rate: f64,
    /// Background counts per second on the source detector.
    pub source_dark_rate: f64,
}

impl Default for DetectionChain {
    /// Dark rates chosen so the uncorrected gate-source correlation sits
    /// near 0.29 with the corrected value near 0.17.
    fn default() -> Self {
        Self {
            gate_path_efficiency: 0.5,
            source_path_efficiency: 0.4,
            gate_dark_rate: 1350.0,
            source_dark_rate: 2600.0,
        }
    }
}

impl DetectionChain {
    pub fn ideal() -> Self {
        Self {
            gate_path_efficiency: 1.0,
            source_path_efficiency: 1.0,
            gate_dark_rate: 0.0,
            source_dark_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            (0.0..=1.0).contains(&self.gate_path_efficiency),
            "DetectionChain.gate_path_efficiency",
            "must lie in [0, 1]",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.source_path_efficiency),
            "DetectionChain.source_path_efficiency",
            "must lie in [0, 1]",
        )?;
        ensure(
            self.gate_dark_rate >= 0.0 && self.gate_dark_rate.is_finite(),
            "DetectionChain.gate_dark_rate",
            "must be non-negative",
        )?;
        ensure(
            self.source_dark_rate >= 0.0 && self.source_dark_rate.is_finite(),
            "DetectionChain.source_dark_rate",
            "must be non-negative",
        )
    }
}

/// Full description of a simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub cavity: CavityParams,
    pub atoms: AtomParams,
    pub coupling: CouplingModel,
    pub timing: TimingSequence,
    pub gate: GatePulse,
    pub source: SourceDrive,
    pub pumping: PumpingModel,
    pub detection: DetectionChain,
    pub n_shots: u64,
    pub master_seed: u64,
    pub retrieval_mode: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cavity: CavityParams::default(),
            atoms: AtomParams::default(),
            coupling: CouplingModel::default(),
            timing: TimingSequence::default(),
            gate: GatePulse::default(),
            source: SourceDrive::default(),
            pumping: PumpingModel::default(),
            detection: DetectionChain::default(),
            n_shots: 10_000,
            master_seed: 0,
            retrieval_mode: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.atoms.validate()?;
        self.coupling.validate()?;
        self.timing.validate()?;
        self.gate.validate()?;
        self.source.validate()?;
        self.pumping.validate()?;
        self.detection.validate()?;
        ensure(self.n_shots >= 1, "RunConfig.n_shots", "must be at least 1")
    }

    /// Mean dark counts per shot in the (gate, source) detection windows.
    pub fn background_means(&self) -> (f64, f64) {
        let gate = if self.retrieval_mode {
            self.detection.gate_dark_rate * self.timing.retrieval_window
        } else {
            0.0
        };
        (gate, self.detection.source_dark_rate * self.timing.source_window)
    }
}

/// Outcome of one repetition of the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_index: u64,
    pub n_stored: u32,
    /// Source photons sent at the cavity (would all be transmitted by the
    /// empty resonant cavity).
    pub source_attempted: u64,
    /// Source photons leaving the cavity mode in transmission, before outcoupling.
    pub source_transmitted_intracavity: u64,
    /// Transmitted source photons that exit through the output mirror.
    pub source_transmitted_outside: u64,
    /// Free-space scattering events during the source window.
    pub n_scattered: u64,
    /// Photons processed up to and including the first scattering event.
    pub photons_to_collapse: Option<u64>,
    pub collapsed: bool,
    pub survived_decay: bool,
    pub retrieved: bool,
    pub detected_source: u64,
    pub detected_gate: u64,
}

impl ShotRecord {
    pub fn gate_present(&self) -> bool {
        self.n_stored > 0
    }
}

/// Stores a coherent gate pulse: the excitation number is Poisson with the
/// stored mean and each excitation draws its own coupling.
pub fn sample_gate_storage(gate: &GatePulse, coupling: &CouplingModel, rng: &mut SimRng) -> SpinWave {
    let n = poisson(rng, gate.mean_stored());
    let couplings = (0..n).map(|_| coupling.sample(rng)).collect();
    SpinWave::with_couplings(couplings)
}

/// Counts from one source window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceWindowOutcome {
    pub attempted: u64,
    pub transmitted: u64,
    pub scattered: u64,
    pub photons_to_collapse: Option<u64>,
}

struct WindowRates {
    transmit_given_no_scatter: f64,
    scatter: f64,
    /// Cumulative scattering weights per excitation, for picking the scatterer.
    cumulative: Vec<f64>,
}

fn window_rates(spin: &SpinWave, detuning: f64, cavity: &CavityParams, atoms: &AtomParams) -> Result<WindowRates> {
    let extinction_blockers: Vec<Blocker> = spin
        .couplings
        .iter()
        .map(|c| Blocker {
            eta: c.extinction,
            detuning,
        })
        .collect();
    let scattering_blockers: Vec<Blocker> = spin
        .couplings
        .iter()
        .map(|c| Blocker {
            eta: c.scattering,
            detuning,
        })
        .collect();
    let transmission = cavity_response(detuning, &extinction_blockers, cavity, atoms)?.transmission;
    let scattering = cavity_response(detuning, &scattering_blockers, cavity, atoms)?.scattering;
    let mut cumulative = Vec::with_capacity(scattering.len());
    let mut acc = 0.0;
    for s in &scattering {
        acc += s;
        cumulative.push(acc);
    }
    let scatter = acc.min(1.0);
    // transmission and scattering are exclusive outcomes of one photon
    let transmission = transmission.min(1.0 - scatter);
    let transmit_given_no_scatter = if scatter < 1.0 {
        (transmission / (1.0 - scatter)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(WindowRates {
        transmit_given_no_scatter,
        scatter,
        cumulative,
    })
}

/// Sends a Poisson number of source photons at the cavity.
///
/// Each photon is transmitted, scattered into free space by one of the
/// stored atoms, or reflected, with the probabilities of
/// [`cavity_response`]. A scattering event destroys the collective phase
/// but leaves the atom blocking; with the pumping probability it also moves
/// that atom to a sublevel with reduced coupling. Photons are processed in
/// runs between scattering events, which is equivalent to a photon-by-photon
/// loop.
pub fn evolve_source_window(
    mut spin: SpinWave,
    source: &SourceDrive,
    pumping: &PumpingModel,
    cavity: &CavityParams,
    atoms: &AtomParams,
    rng: &mut SimRng,
) -> Result<(SourceWindowOutcome, SpinWave)> {
    let attempted = poisson(rng, source.mean_source_photons);
    let mut outcome = SourceWindowOutcome {
        attempted,
        ..Default::default()
    };
    let mut remaining = attempted;
    let mut processed = 0u64;
    let mut rates = window_rates(&spin, source.detuning, cavity, atoms)?;
    while remaining > 0 {
        let quiet = geometric(rng, rates.scatter);
        if quiet >= remaining {
            outcome.transmitted += binomial(rng, remaining, rates.transmit_given_no_scatter);
            break;
        }
        outcome.transmitted += binomial(rng, quiet, rates.transmit_given_no_scatter);
        remaining -= quiet + 1;
        processed += quiet + 1;
        outcome.scattered += 1;
        outcome.photons_to_collapse.get_or_insert(processed);
        spin.coherent = false;

        let u = rng.random_range(0.0..rates.scatter);
        let atom = rates
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(rates.cumulative.len() - 1);
        if bernoulli(rng, pumping.hop_prob_per_scatter) && pumping.eta_ratio_after_hop < 1.0 {
            spin.couplings[atom] = spin.couplings[atom].scaled(pumping.eta_ratio_after_hop);
            rates = window_rates(&spin, source.detuning, cavity, atoms)?;
        }
    }
    Ok((outcome, spin))
}

/// Dephasing of the collective excitation over `elapsed` seconds. Only the
/// retrievability is lost; the atoms stay in the blocking state.
pub fn apply_spin_decay(mut spin: SpinWave, elapsed: f64, atoms: &AtomParams, rng: &mut SimRng) -> SpinWave {
    let survival = (-elapsed / atoms.tau_spinwave).exp();
    if !bernoulli(rng, survival) {
        spin.survived_decay = false;
    }
    spin
}

/// Reads the gate photon back out of the ensemble.
pub fn retrieve_gate(spin: &SpinWave, retrieval_efficiency: f64, rng: &mut SimRng) -> bool {
    if spin.n_exc() == 0 || !spin.coherent || !spin.survived_decay {
        return false;
    }
    bernoulli(rng, retrieval_efficiency)
}

/// Photon counter: binomial loss followed by Poisson background.
pub fn detect(true_count: u64, window: f64, efficiency: f64, dark_rate: f64, rng: &mut SimRng) -> u64 {
    binomial(rng, true_count, efficiency) + poisson(rng, dark_rate * window)
}

/// One full repetition, deterministic in `(config.master_seed, shot_index)`.
pub fn run_shot(config: &RunConfig, shot_index: u64) -> Result<ShotRecord> {
    let mut rng = shot_rng(config.master_seed, shot_index);
    let spin = sample_gate_storage(&config.gate, &config.coupling, &mut rng);
    let n_stored = u32::try_from(spin.n_exc()).map_err(|_| Error::Resource("stored excitation count".into()))?;
    let spin = apply_spin_decay(spin, config.timing.storage_time(), &config.atoms, &mut rng);
    let (window, spin) = evolve_source_window(
        spin,
        &config.source,
        &config.pumping,
        &config.cavity,
        &config.atoms,
        &mut rng,
    )?;
    let retrieved = config.retrieval_mode && retrieve_gate(&spin, config.gate.retrieval_efficiency, &mut rng);
    let outside = binomial(&mut rng, window.transmitted, config.cavity.outcoupling());
    let det = &config.detection;
    let detected_source = detect(
        outside,
        config.timing.source_window,
        det.source_path_efficiency,
        det.source_dark_rate,
        &mut rng,
    );
    let detected_gate = if config.retrieval_mode {
        detect(
            u64::from(retrieved),
            config.timing.retrieval_window,
            det.gate_path_efficiency,
            det.gate_dark_rate,
            &mut rng,
        )
    } else {
        0
    };
    Ok(ShotRecord {
        shot_index,
        n_stored,
        source_attempted: window.attempted,
        source_transmitted_intracavity: window.transmitted,
        source_transmitted_outside: outside,
        n_scattered: window.scattered,
        photons_to_collapse: window.photons_to_collapse,
        collapsed: n_stored > 0 && !spin.coherent,
        survived_decay: spin.survived_decay,
        retrieved,
        detected_source,
        detected_gate,
    })
}

fn allocate(n_shots: u64) -> Result<Vec<ShotRecord>> {
    let n = usize::try_from(n_shots).map_err(|_| Error::Resource(format!("{n_shots} shots")))?;
    let mut records = Vec::new();
    records
        .try_reserve_exact(n)
        .map_err(|e| Error::Resource(format!("{n_shots} shot records: {e}")))?;
    Ok(records)
}

/// Runs every shot of `config` on the current rayon pool. Records come back
/// ordered by shot index.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<ShotRecord>> {
    config.validate()?;
    let mut records = allocate(config.n_shots)?;
    let results: Vec<Result<ShotRecord>> = (0..config.n_shots)
        .into_par_iter()
        .map(|i| run_shot(config, i))
        .collect();
    for r in results {
        records.push(r?);
    }
    Ok(records)
}

/// Single-threaded reference for [`run_experiment`].
pub fn run_experiment_serial(config: &RunConfig) -> Result<Vec<ShotRecord>> {
    config.validate()?;
    let mut records = allocate(config.n_shots)?;
    for i in 0..config.n_shots {
        records.push(run_shot(config, i)?);
    }
    Ok(records)
}
