use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use sptsim_cli::presets::{self, PresetName};
use sptsim_cli::{load_config, parse_config, run_preset, write_config, CliError};
use sptsim_core::{CooperativityModel, CouplingModel, RunConfig};

fn sptsim(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sptsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        (0.1f64..10.0, 1e-6f64..1e-3, 0.0f64..1e-3, 0.1f64..20.0, 0.0f64..5.0),
        (0.1f64..100.0, 0.0f64..50.0, 0.0f64..1.0, 0.0f64..1.0),
        (0.0f64..1.0, 0.5f64..1.0, 0.0f64..1.0, 0.0f64..5000.0),
        (
            1u64..1_000_000,
            any::<u64>(),
            any::<bool>(),
            any::<bool>(),
            0.0f64..8.0,
            -2.0f64..2.0,
        ),
    )
        .prop_map(|(a, b, c, d)| {
            let mut cfg = RunConfig::default();
            cfg.cavity.kappa = sptsim_core::units::mhz_to_angular(a.0);
            cfg.cavity.mirror_transmission = a.1;
            cfg.cavity.mirror_loss = a.2;
            cfg.atoms.eta0 = a.3;
            cfg.timing.source_window = sptsim_core::units::us_to_seconds(b.0);
            cfg.source.mean_source_photons = b.1;
            cfg.source.detuning = sptsim_core::units::mhz_to_angular(d.5);
            cfg.gate.storage_efficiency = b.2;
            cfg.pumping.hop_prob_per_scatter = b.3;
            cfg.pumping.eta_ratio_after_hop = c.1;
            cfg.detection.gate_path_efficiency = c.0;
            cfg.detection.source_path_efficiency = c.2;
            cfg.detection.source_dark_rate = c.3;
            cfg.n_shots = d.0;
            cfg.master_seed = d.1;
            cfg.retrieval_mode = d.2;
            cfg.coupling = if d.3 {
                CouplingModel::Effective {
                    extinction: d.4,
                    scattering: a.4,
                }
            } else {
                CouplingModel::Sampled(CooperativityModel {
                    eta0: d.4,
                    standing_wave: d.2,
                    geometric_weight: b.2,
                })
            };
            cfg
        })
}

proptest! {
    #[test]
    fn config_round_trips(cfg in arb_config()) {
        let text = write_config(&cfg);
        prop_assert_eq!(parse_config(&text, "generated").unwrap(), cfg);
    }
}

#[test]
fn preset_configs_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in PresetName::ALL {
        let base = presets::preset(name).base;
        let path = dir.path().join(format!("{name}.cfg"));
        fs::write(&path, write_config(&base)).unwrap();
        assert_eq!(load_config(&path).unwrap(), base, "{name}");
    }
}

#[test]
fn invalid_values_are_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "[detection]\nsource_path_efficiency = 1.5\n").unwrap();
    let err = load_config(&path).unwrap_err();
    assert!(matches!(err, CliError::Invalid(_)), "{err}");
    assert!(err.to_string().contains("source_path_efficiency"), "{err}");
}

#[test]
fn run_writes_all_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let p = presets::fig2();
    let a = run_preset(&p, Some(50), 3, &dir.path().join("a")).unwrap();
    run_preset(&p, Some(50), 3, &dir.path().join("b")).unwrap();
    let names: Vec<String> = a
        .files
        .iter()
        .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for expected in [
        "manifest.json",
        "summary.json",
        "config.cfg",
        "spectrum_ng0.csv",
        "contrast.csv",
    ] {
        assert!(names.iter().any(|n| n == expected), "{expected} missing from {names:?}");
    }
    for name in &names {
        let x = fs::read(dir.path().join("a").join(name)).unwrap();
        let y = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let csv = fs::read_to_string(dir.path().join("a/spectrum_ng0.4.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "detuning_mhz,mean_transmission,sem");
    assert_eq!(csv.lines().count(), 26);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["preset"], "fig2");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["shots_per_point"], 50);
    // no temporary files left behind
    assert!(fs::read_dir(dir.path().join("a")).unwrap().all(|e| !e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .ends_with(".tmp")));
}

#[test]
fn retrieval_summary_has_expected_keys() {
    let dir = tempfile::tempdir().unwrap();
    run_preset(&presets::fig4e(), Some(3_000), 1, dir.path()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for key in [
        "m_s0_intracavity",
        "m_s0_outside",
        "gain_retrieval_intracavity",
        "gain_retrieval_outside_ratio",
    ] {
        let e = &summary[key];
        assert!(e["value"].is_f64(), "{key}: {e}");
        assert!(e["err_low"].is_f64() && e["err_high"].is_f64(), "{key}: {e}");
    }
}

#[test]
fn binary_run_and_compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sptsim(
        &[
            "run", "--preset", "fig4e", "--shots", "2000", "--seed", "5", "--out", "r",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("r/summary.json").exists());

    // a small run is far from the reference bands somewhere, or within all of them
    let out = sptsim(&["compare", "--summary", "r/summary.json"], dir.path());
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 1, "{code}");

    fs::write(
        dir.path().join("pass.json"),
        r#"{"m_s0_intracavity": {"value": 2.82, "err_low": 0.05, "err_high": 0.05}}"#,
    )
    .unwrap();
    let out = sptsim(&["compare", "--summary", "pass.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS m_s0_intracavity"));

    fs::write(
        dir.path().join("fail.json"),
        r#"{"g2_corrected": {"value": 0.9, "err_low": 0.01, "err_high": 0.01}}"#,
    )
    .unwrap();
    let out = sptsim(&["compare", "--summary", "fail.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL g2_corrected"));
}

#[test]
fn binary_reports_usage_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sptsim(&["run", "--preset", "fig5"], dir.path()).status.code(), Some(2));

    fs::write(
        dir.path().join("bad.cfg"),
        "[cavity]\nkappa_mhz = 1.0\nkapa_mhz = 2.0\n",
    )
    .unwrap();
    let out = sptsim(&["run", "--config", "bad.cfg", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("bad.cfg") && err.contains('3') && err.contains("kapa_mhz"),
        "{err}"
    );
    assert!(!dir.path().join("x").exists());

    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = sptsim(&["run", "--shots", "10", "--out", "blocker/inner"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = sptsim(&["compare", "--summary", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_command_prints_a_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = sptsim(&["config", "--preset", "fig3"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(parse_config(&text, "stdout").unwrap(), presets::fig3().base);
}
