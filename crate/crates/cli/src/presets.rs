//! Named experiment presets: a base configuration plus a sweep.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sptsim_core::units::{mhz_to_angular, us_to_seconds};
use sptsim_core::{CouplingModel, GatePulse, RunConfig, SourceDrive, TimingSequence};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    /// Transmission spectra for several stored gate photon numbers.
    Fig2,
    /// Detected-count histograms versus detuning.
    Fig3,
    /// Gain versus source strength.
    Fig4ab,
    /// Gate retrieval versus source strength.
    Fig4e,
    /// Gate-source cross-correlation.
    G2,
    /// A single run of the configuration file.
    Custom,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        Self::Fig2,
        Self::Fig3,
        Self::Fig4ab,
        Self::Fig4e,
        Self::G2,
        Self::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4ab => "fig4ab",
            Self::Fig4e => "fig4e",
            Self::G2 => "g2",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{s}`")))
    }
}

/// What varies between the runs of a preset. Detunings are in rad/s and
/// windows in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Sweep {
    /// One spectrum per stored mean photon number.
    Spectra {
        stored_means: Vec<f64>,
        detunings: Vec<f64>,
    },
    /// Histogram columns with and without the gate.
    Histogram { detunings: Vec<f64> },
    /// Gain at each source strength, for each window.
    SourceStrength { windows: Vec<f64>, strengths: Vec<f64> },
    /// Retrieval-mode runs at each source strength; the zero strength is the reference.
    Retrieval { strengths: Vec<f64> },
    /// The base configuration alone.
    Single,
}

impl Sweep {
    pub fn points(&self) -> usize {
        match self {
            Self::Spectra {
                stored_means,
                detunings,
            } => stored_means.len() * detunings.len(),
            Self::Histogram { detunings } => 2 * detunings.len(),
            Self::SourceStrength { windows, strengths } => windows.len() * strengths.len(),
            Self::Retrieval { strengths } => strengths.len() + 1,
            Self::Single => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPreset {
    pub name: PresetName,
    /// Shots per sweep point are `base.n_shots`.
    pub base: RunConfig,
    pub sweep: Sweep,
}

/// Gate-free detected source counts at the fig3 resonance peak.
pub const FIG3_ZERO_GATE_PEAK: f64 = 17.0;

/// Stored gate photon numbers of the spectra.
pub const FIG2_STORED_MEANS: [f64; 4] = [0.0, 0.4, 1.4, 2.9];

/// Extinction cooperativity matching the measured one-photon transmission of 0.09.
pub fn measured_extinction_eta() -> f64 {
    1.0 / 0.09f64.sqrt() - 1.0
}

/// Symmetric detuning grid from -0.3 to 0.3 MHz in 0.025 MHz steps; exactly zero in the middle.
pub fn detuning_grid() -> Vec<f64> {
    (-12..=12).map(|k| mhz_to_angular(f64::from(k) / 40.0)).collect()
}

/// Mean intracavity source photon number that puts the gate-free detected
/// count on resonance at `detected`, dark counts included.
pub fn source_mean_for_detected(config: &RunConfig, detected: f64) -> f64 {
    let dark = config.detection.source_dark_rate * config.timing.source_window;
    let per_photon = config.cavity.outcoupling() * config.detection.source_path_efficiency;
    ((detected - dark) / per_photon).max(0.0)
}

fn source_window_config(window_us: f64, stored: f64) -> RunConfig {
    RunConfig {
        gate: GatePulse::with_stored_mean(stored),
        timing: TimingSequence::source_only(us_to_seconds(window_us)),
        ..RunConfig::default()
    }
}

pub fn fig2() -> ExperimentPreset {
    let mut base = source_window_config(24.0, 0.0);
    base.source = SourceDrive::resonant(source_mean_for_detected(&base, FIG3_ZERO_GATE_PEAK));
    ExperimentPreset {
        name: PresetName::Fig2,
        base,
        sweep: Sweep::Spectra {
            stored_means: FIG2_STORED_MEANS.to_vec(),
            detunings: detuning_grid(),
        },
    }
}

pub fn fig3() -> ExperimentPreset {
    let mut base = source_window_config(24.0, 0.5);
    base.coupling = CouplingModel::Effective {
        extinction: measured_extinction_eta(),
        scattering: sptsim_core::engine::EFFECTIVE_ETA_SCATTERING,
    };
    base.source = SourceDrive::resonant(source_mean_for_detected(&base, FIG3_ZERO_GATE_PEAK));
    base.n_shots = 100_000;
    ExperimentPreset {
        name: PresetName::Fig3,
        base,
        sweep: Sweep::Histogram {
            detunings: detuning_grid(),
        },
    }
}

/// Source strengths of the gain curve. The first nine points form the linear fit.
pub fn gain_strengths() -> Vec<f64> {
    vec![
        5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 100.0, 200.0, 400.0, 700.0, 1000.0, 1500.0, 2000.0, 3000.0,
    ]
}

/// Points used for the small-signal slope.
pub const LINEAR_FIT_POINTS: usize = 9;

pub fn fig4ab() -> ExperimentPreset {
    ExperimentPreset {
        name: PresetName::Fig4ab,
        base: source_window_config(50.0, 0.4),
        sweep: Sweep::SourceStrength {
            windows: vec![us_to_seconds(25.0), us_to_seconds(50.0)],
            strengths: gain_strengths(),
        },
    }
}

pub fn fig4e() -> ExperimentPreset {
    let base = RunConfig {
        gate: GatePulse::with_stored_mean(1.0),
        retrieval_mode: true,
        n_shots: 100_000,
        ..RunConfig::default()
    };
    ExperimentPreset {
        name: PresetName::Fig4e,
        base,
        sweep: Sweep::Retrieval {
            strengths: vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0],
        },
    }
}

pub fn g2() -> ExperimentPreset {
    let mut base = RunConfig {
        gate: GatePulse::with_stored_mean(0.2),
        retrieval_mode: true,
        n_shots: 10_000_000,
        ..RunConfig::default()
    };
    base.source = SourceDrive::resonant(0.1 / base.cavity.outcoupling());
    ExperimentPreset {
        name: PresetName::G2,
        base,
        sweep: Sweep::Single,
    }
}

pub fn custom(base: RunConfig) -> ExperimentPreset {
    ExperimentPreset {
        name: PresetName::Custom,
        base,
        sweep: Sweep::Single,
    }
}

/// The preset with its default configuration. `custom` starts from the
/// library defaults.
pub fn preset(name: PresetName) -> ExperimentPreset {
    match name {
        PresetName::Fig2 => fig2(),
        PresetName::Fig3 => fig3(),
        PresetName::Fig4ab => fig4ab(),
        PresetName::Fig4e => fig4e(),
        PresetName::G2 => g2(),
        PresetName::Custom => custom(RunConfig::default()),
    }
}
