use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sptsim_cli::report::BUILTIN_REFERENCE;
use sptsim_cli::{
    compare_report, load_config, parse_reference, parse_summary, preset, run_preset, write_config, CliError, PresetName,
};

/// Monte-Carlo simulator of a cavity-QED single-photon transistor.
#[derive(Parser)]
#[command(name = "sptsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset and write manifest, CSV tables, and a JSON summary.
    Run {
        #[arg(long, value_enum, default_value_t = PresetName::Custom)]
        preset: PresetName,
        /// Configuration file replacing the preset's base configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Shots per sweep point.
        #[arg(long)]
        shots: Option<u64>,
        /// Master seed; defaults to the configuration's `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, `out/<preset>` by default.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads. Affects wall time only.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare a summary against reference bands; exits with 1 on any failure.
    Compare {
        #[arg(long)]
        summary: PathBuf,
        /// CSV with columns observable,low,high,note. Defaults to the built-in table.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Print the resolved configuration of a preset.
    Config {
        #[arg(long, value_enum, default_value_t = PresetName::Custom)]
        preset: PresetName,
    },
}

const EXIT_ACCEPTANCE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run {
            preset: name,
            config,
            shots,
            seed,
            out,
            threads,
        } => {
            let mut p = preset(name);
            if let Some(path) = config {
                p.base = load_config(&path)?;
            }
            let seed = seed.unwrap_or(p.base.master_seed);
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(name.as_str()));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            let artifacts = pool.install(|| run_preset(&p, shots, seed, &out))?;
            for file in &artifacts.files {
                println!("wrote {}", file.display());
            }
            for note in &artifacts.outputs.notes {
                eprintln!("note: {note}");
            }
            for (name, e) in &artifacts.outputs.summary {
                println!("{name} = {} (-{} +{})", e.value, e.err_low, e.err_high);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { summary, reference } => {
            let summary = parse_summary(&read(&summary)?)?;
            let table = match reference {
                Some(path) => parse_reference(&read(&path)?)?,
                None => parse_reference(BUILTIN_REFERENCE)?,
            };
            let report = compare_report(&summary, &table)?;
            print!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ACCEPTANCE)
            })
        }
        Command::Config { preset: name } => {
            print!("{}", write_config(&preset(name).base));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
