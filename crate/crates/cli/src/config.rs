//! Sectioned `key = value` configuration files.
//!
//! ```text
//! # comments run to the end of the line
//! [cavity]
//! kappa_mhz = 0.15
//! [run]
//! n_shots = 10000
//! ```
//!
//! Every key is optional and falls back to the documented default.
//! Frequencies are given in MHz (`omega / 2 pi`), durations in microseconds,
//! and dark rates in counts per second; the unit is part of the key name.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use sptsim_core::engine::{EFFECTIVE_ETA_EXTINCTION, EFFECTIVE_ETA_SCATTERING};
use sptsim_core::units::{angular_to_mhz, mhz_to_angular, seconds_to_us, us_to_seconds};
use sptsim_core::{CooperativityModel, CouplingModel, RunConfig};

use crate::error::{CliError, Result};

pub const SECTIONS: [&str; 9] = [
    "cavity",
    "atoms",
    "cooperativity",
    "timing",
    "gate",
    "source",
    "pumping",
    "detection",
    "run",
];

#[derive(Clone, Copy)]
enum Unit {
    Plain,
    Mhz,
    Us,
}

impl Unit {
    fn to_internal(self, v: f64) -> f64 {
        match self {
            Unit::Plain => v,
            Unit::Mhz => mhz_to_angular(v),
            Unit::Us => us_to_seconds(v),
        }
    }

    fn to_file(self, v: f64) -> f64 {
        match self {
            Unit::Plain => v,
            Unit::Mhz => angular_to_mhz(v),
            Unit::Us => seconds_to_us(v),
        }
    }
}

enum Access {
    Float {
        unit: Unit,
        get: fn(&RunConfig) -> f64,
        set: fn(&mut RunConfig, f64),
    },
    Int {
        get: fn(&RunConfig) -> u64,
        set: fn(&mut RunConfig, u64),
    },
    Bool {
        get: fn(&RunConfig) -> bool,
        set: fn(&mut RunConfig, bool),
    },
}

struct Field {
    section: &'static str,
    key: &'static str,
    access: Access,
}

macro_rules! float {
    ($section:literal, $key:literal, $unit:expr, $($path:ident).+) => {
        Field {
            section: $section,
            key: $key,
            access: Access::Float { unit: $unit, get: |c| c.$($path).+, set: |c, v| c.$($path).+ = v },
        }
    };
}

// The cooperativity section depends on the chosen model and is handled apart.
const FIELDS: &[Field] = &[
    float!("cavity", "kappa_mhz", Unit::Mhz, cavity.kappa),
    float!("cavity", "mirror_transmission", Unit::Plain, cavity.mirror_transmission),
    float!("cavity", "mirror_loss", Unit::Plain, cavity.mirror_loss),
    float!("atoms", "gamma_mhz", Unit::Mhz, atoms.gamma),
    float!("atoms", "eta0", Unit::Plain, atoms.eta0),
    float!("atoms", "tau_us", Unit::Us, atoms.tau_spinwave),
    float!("atoms", "optical_depth", Unit::Plain, atoms.optical_depth),
    float!("timing", "storage_ramp_us", Unit::Us, timing.storage_ramp),
    float!("timing", "hold_before_source_us", Unit::Us, timing.hold_before_source),
    float!("timing", "source_window_us", Unit::Us, timing.source_window),
    float!(
        "timing",
        "hold_before_retrieval_us",
        Unit::Us,
        timing.hold_before_retrieval
    ),
    float!("timing", "retrieval_window_us", Unit::Us, timing.retrieval_window),
    float!("gate", "mean_incident_photons", Unit::Plain, gate.mean_incident_photons),
    float!("gate", "storage_efficiency", Unit::Plain, gate.storage_efficiency),
    float!("gate", "retrieval_efficiency", Unit::Plain, gate.retrieval_efficiency),
    float!("source", "mean_source_photons", Unit::Plain, source.mean_source_photons),
    float!("source", "detuning_mhz", Unit::Mhz, source.detuning),
    float!(
        "pumping",
        "hop_prob_per_scatter",
        Unit::Plain,
        pumping.hop_prob_per_scatter
    ),
    float!(
        "pumping",
        "eta_ratio_after_hop",
        Unit::Plain,
        pumping.eta_ratio_after_hop
    ),
    float!(
        "detection",
        "gate_path_efficiency",
        Unit::Plain,
        detection.gate_path_efficiency
    ),
    float!(
        "detection",
        "source_path_efficiency",
        Unit::Plain,
        detection.source_path_efficiency
    ),
    float!("detection", "gate_dark_rate_hz", Unit::Plain, detection.gate_dark_rate),
    float!(
        "detection",
        "source_dark_rate_hz",
        Unit::Plain,
        detection.source_dark_rate
    ),
    Field {
        section: "run",
        key: "n_shots",
        access: Access::Int {
            get: |c| c.n_shots,
            set: |c, v| c.n_shots = v,
        },
    },
    Field {
        section: "run",
        key: "master_seed",
        access: Access::Int {
            get: |c| c.master_seed,
            set: |c, v| c.master_seed = v,
        },
    },
    Field {
        section: "run",
        key: "retrieval_mode",
        access: Access::Bool {
            get: |c| c.retrieval_mode,
            set: |c, v| c.retrieval_mode = v,
        },
    },
];

const EFFECTIVE_KEYS: [&str; 2] = ["eta_extinction", "eta_scattering"];
const SAMPLED_KEYS: [&str; 3] = ["eta0", "standing_wave", "geometric_weight"];

/// Raw `[cooperativity]` entries with their line numbers.
#[derive(Default)]
struct CooperativityDraft {
    model: Option<(String, usize)>,
    entries: Vec<(String, String, usize)>,
}

struct Parser<'a> {
    origin: &'a str,
}

impl Parser<'_> {
    fn error(&self, line: usize, message: impl Into<String>) -> CliError {
        CliError::Parse {
            origin: self.origin.to_string(),
            line,
            message: message.into(),
        }
    }

    fn float(&self, line: usize, key: &str, raw: &str) -> Result<f64> {
        raw.parse()
            .map_err(|_| self.error(line, format!("`{raw}` is not a number (key `{key}`)")))
    }

    fn int(&self, line: usize, key: &str, raw: &str) -> Result<u64> {
        raw.parse()
            .map_err(|_| self.error(line, format!("`{raw}` is not a non-negative integer (key `{key}`)")))
    }

    fn boolean(&self, line: usize, key: &str, raw: &str) -> Result<bool> {
        match raw {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.error(line, format!("`{raw}` is not `true` or `false` (key `{key}`)"))),
        }
    }

    fn cooperativity(&self, draft: CooperativityDraft) -> Result<CouplingModel> {
        let (model, model_line) = draft.model.unwrap_or_else(|| ("effective".to_string(), 0));
        match model.as_str() {
            "effective" => {
                let (mut extinction, mut scattering) = (EFFECTIVE_ETA_EXTINCTION, EFFECTIVE_ETA_SCATTERING);
                for (key, raw, line) in draft.entries {
                    match key.as_str() {
                        "eta_extinction" => extinction = self.float(line, &key, &raw)?,
                        "eta_scattering" => scattering = self.float(line, &key, &raw)?,
                        _ => return Err(self.error(line, format!("key `{key}` requires `model = sampled`"))),
                    }
                }
                Ok(CouplingModel::Effective { extinction, scattering })
            }
            "sampled" => {
                let mut m = CooperativityModel::default();
                for (key, raw, line) in draft.entries {
                    match key.as_str() {
                        "eta0" => m.eta0 = self.float(line, &key, &raw)?,
                        "standing_wave" => m.standing_wave = self.boolean(line, &key, &raw)?,
                        "geometric_weight" => m.geometric_weight = self.float(line, &key, &raw)?,
                        _ => return Err(self.error(line, format!("key `{key}` requires `model = effective`"))),
                    }
                }
                Ok(CouplingModel::Sampled(m))
            }
            other => Err(self.error(
                model_line,
                format!("unknown cooperativity model `{other}` (expected `effective` or `sampled`)"),
            )),
        }
    }

    fn parse(&self, text: &str) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        let mut section: Option<&str> = None;
        let mut seen: HashSet<(String, String)> = HashSet::new();
        let mut coop = CooperativityDraft::default();
        for (index, raw_line) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| self.error(line, "unterminated section header"))?
                    .trim();
                let known = SECTIONS
                    .iter()
                    .find(|s| **s == name)
                    .ok_or_else(|| self.error(line, format!("unknown section `[{name}]`")))?;
                section = Some(known);
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| self.error(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let current = section.ok_or_else(|| self.error(line, format!("key `{key}` appears before any section")))?;
            if value.is_empty() {
                return Err(self.error(line, format!("key `{key}` has no value")));
            }
            if !seen.insert((current.to_string(), key.to_string())) {
                return Err(self.error(line, format!("duplicate key `{key}` in `[{current}]`")));
            }
            if current == "cooperativity" {
                if key == "model" {
                    coop.model = Some((value.to_string(), line));
                } else if EFFECTIVE_KEYS.contains(&key) || SAMPLED_KEYS.contains(&key) {
                    coop.entries.push((key.to_string(), value.to_string(), line));
                } else {
                    return Err(self.error(line, format!("unknown key `{key}` in `[cooperativity]`")));
                }
                continue;
            }
            let field = FIELDS
                .iter()
                .find(|f| f.section == current && f.key == key)
                .ok_or_else(|| self.error(line, format!("unknown key `{key}` in `[{current}]`")))?;
            match field.access {
                Access::Float { unit, set, .. } => set(&mut config, unit.to_internal(self.float(line, key, value)?)),
                Access::Int { set, .. } => set(&mut config, self.int(line, key, value)?),
                Access::Bool { set, .. } => set(&mut config, self.boolean(line, key, value)?),
            }
        }
        config.coupling = self.cooperativity(coop)?;
        Ok(config)
    }
}

/// Parses configuration text without validating it. `origin` names the
/// source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig> {
    Parser { origin }.parse(text)
}

/// Reads, parses, and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = parse_config(&text, &path.display().to_string())?;
    config.validate().map_err(CliError::Invalid)?;
    Ok(config)
}

/// Serializes every field, so that `parse_config(&write_config(c))` gives back `c`.
pub fn write_config(config: &RunConfig) -> String {
    let mut out = String::new();
    for section in SECTIONS {
        let _ = writeln!(out, "[{section}]");
        if section == "cooperativity" {
            match config.coupling {
                CouplingModel::Effective { extinction, scattering } => {
                    let _ = writeln!(out, "model = effective");
                    let _ = writeln!(out, "eta_extinction = {extinction}");
                    let _ = writeln!(out, "eta_scattering = {scattering}");
                }
                CouplingModel::Sampled(m) => {
                    let _ = writeln!(out, "model = sampled");
                    let _ = writeln!(out, "eta0 = {}", m.eta0);
                    let _ = writeln!(out, "standing_wave = {}", m.standing_wave);
                    let _ = writeln!(out, "geometric_weight = {}", m.geometric_weight);
                }
            }
        }
        for field in FIELDS.iter().filter(|f| f.section == section) {
            let _ = match field.access {
                Access::Float { unit, get, .. } => writeln!(out, "{} = {}", field.key, unit.to_file(get(config))),
                Access::Int { get, .. } => writeln!(out, "{} = {}", field.key, get(config)),
                Access::Bool { get, .. } => writeln!(out, "{} = {}", field.key, get(config)),
            };
        }
        out.push('\n');
    }
    out
}
