//! Artifact files of a preset run. Every file is written to a temporary
//! name in the target directory and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sptsim_core::RunConfig;

use crate::config::write_config;
use crate::error::{CliError, Result};
use crate::experiments::{execute, Outputs, Summary};
use crate::presets::{ExperimentPreset, PresetName, Sweep};

/// Version recorded in manifests. Builds from a git checkout may set
/// `SPTSIM_VERSION` to the output of `git describe`.
pub const VERSION: &str = match option_env!("SPTSIM_VERSION") {
    Some(v) => v,
    None => concat!("v", env!("CARGO_PKG_VERSION")),
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.cfg";

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    preset: PresetName,
    seed: u64,
    shots_per_point: u64,
    sweep_points: usize,
    sweep: &'a Sweep,
    config: &'a RunConfig,
    files: Vec<String>,
    notes: &'a [String],
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

pub fn summary_json(summary: &Summary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary).map_err(|e| CliError::Schema(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Result of [`run_preset`].
#[derive(Debug)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
    pub outputs: Outputs,
}

/// Runs `preset` with `n_shots` per sweep point (the preset default when
/// `None`) and writes the manifest, the resolved configuration, one CSV per
/// table, and the JSON summary into `out_dir`. Identical arguments give
/// byte-identical files.
pub fn run_preset(preset: &ExperimentPreset, n_shots: Option<u64>, seed: u64, out_dir: &Path) -> Result<RunArtifacts> {
    let mut preset = preset.clone();
    if let Some(n) = n_shots {
        preset.base.n_shots = n;
    }
    preset.base.master_seed = seed;
    preset.base.validate().map_err(CliError::Invalid)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let outputs = execute(&preset, seed)?;
    let mut files = Vec::new();
    let put = |files: &mut Vec<PathBuf>, name: &str, bytes: &[u8]| -> Result<()> {
        let path = out_dir.join(name);
        write_atomic(&path, bytes)?;
        files.push(path);
        Ok(())
    };
    put(&mut files, CONFIG_FILE, write_config(&preset.base).as_bytes())?;
    for table in &outputs.tables {
        put(&mut files, &table.file_name, &table.to_csv()?)?;
    }
    put(&mut files, SUMMARY_FILE, summary_json(&outputs.summary)?.as_bytes())?;

    let mut names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    names.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        tool: "sptsim",
        version: VERSION,
        preset: preset.name,
        seed,
        shots_per_point: preset.base.n_shots,
        sweep_points: preset.sweep.points(),
        sweep: &preset.sweep,
        config: &preset.base,
        files: names,
        notes: &outputs.notes,
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Schema(e.to_string()))?;
    json.push('\n');
    put(&mut files, MANIFEST_FILE, json.as_bytes())?;
    Ok(RunArtifacts { files, outputs })
}
