//! Stochastic simulator of a cavity-QED single-photon transistor.
//!
//! A weak gate pulse is stored as a collective atomic excitation inside an
//! ensemble coupled to a high-finesse cavity. Each stored excitation blocks
//! the cavity transmission of a resonant source beam. The crate is split in
//! three layers:
//!
//! * [`qed`]: closed-form extinction, scattering, and spectra;
//! * [`engine`]: shot-by-shot Monte-Carlo of the storage, source, and
//!   retrieval sequence with lossy detection;
//! * [`stats`]: estimators turning shot records into spectra, histograms,
//!   gain, retrieval curves, and cross-correlations.

pub mod engine;
pub mod error;
pub mod qed;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod units;

pub use engine::{
    CouplingModel, DetectionChain, GatePulse, PumpingModel, RunConfig, ShotRecord, SourceDrive, TimingSequence,
};
pub use error::{Error, Result};
pub use qed::{AtomParams, CavityParams, CooperativityModel};
