//! Configuration files, experiment presets, artifact output, and reference
//! comparison for the `sptsim` command.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod report;

pub use config::{load_config, parse_config, write_config};
pub use error::{CliError, Result};
pub use experiments::{execute, Outputs, Summary, Table};
pub use output::run_preset;
pub use presets::{preset, ExperimentPreset, PresetName, Sweep};
pub use report::{compare_report, parse_reference, parse_summary, ReferenceRow, Report};
