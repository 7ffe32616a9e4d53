//! Runs a preset's sweep and reduces it to CSV tables and a flat summary.

use std::collections::BTreeMap;

use sptsim_core::engine::run_experiment;
use sptsim_core::qed::{extinction, sample_cooperativity};
use sptsim_core::rng::{derive_seed, shot_rng};
use sptsim_core::sampling::poisson;
use sptsim_core::stats::histogram::split_by_threshold;
use sptsim_core::stats::{
    average_spectrum, build_histogram, contrast_bound, fit_linear, fit_saturation, g2_cross, gain, retrieval_curve,
    switching_contrast, BootstrapConfig, Classifier, CountBinning, Estimate, PhotonUnits, RetrievalPoint,
    RetrievalSelection,
};
use sptsim_core::units::{angular_to_mhz, seconds_to_us};
use sptsim_core::{CouplingModel, GatePulse, RunConfig, ShotRecord, SourceDrive};

use crate::error::{CliError, Result};
use crate::presets::{ExperimentPreset, PresetName, Sweep, LINEAR_FIT_POINTS};

/// Observable name to value with a one-sigma interval.
pub type Summary = BTreeMap<String, Estimate>;

/// One CSV file: header and rows of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file_name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file_name: file_name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, cells: impl IntoIterator<Item = String>) {
        self.rows.push(cells.into_iter().collect());
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.into_inner().map_err(|e| CliError::Schema(format!("csv: {e}")))
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Schema(format!("csv: {e}"))
}

/// Everything a preset produces apart from the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub tables: Vec<Table>,
    pub summary: Summary,
    /// Estimators that could not be evaluated, e.g. a fit that did not converge.
    pub notes: Vec<String>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Label used in file and observable names, e.g. `0.4` or `25`.
fn label(v: f64) -> String {
    let rounded = (v * 1e6).round() / 1e6;
    format!("{rounded}")
}

fn mean_sem(xs: impl Iterator<Item = f64>) -> Estimate {
    let (mut n, mut sum, mut sq) = (0f64, 0f64, 0f64);
    for x in xs {
        n += 1.0;
        sum += x;
        sq += x * x;
    }
    if n == 0.0 {
        return Estimate::exact(f64::NAN);
    }
    let mean = sum / n;
    let var = if n > 1.0 {
        ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Estimate::symmetric(mean, (var / n).sqrt())
}

fn ratio(num: Estimate, den: Estimate) -> Estimate {
    let r = num.value / den.value;
    let rel = ((num.sigma() / num.value).powi(2) + (den.sigma() / den.value).powi(2)).sqrt();
    Estimate::symmetric(r, (r * rel).abs())
}

/// Derives seeds for the runs and bootstraps of one preset execution.
struct Seeds(u64);

impl Seeds {
    fn run(&self, group: u64, index: usize) -> u64 {
        derive_seed(self.0, (group << 32) | index as u64)
    }

    fn bootstrap(&self, label: u64) -> BootstrapConfig {
        BootstrapConfig {
            seed: derive_seed(self.0, u64::MAX - label),
            ..BootstrapConfig::default()
        }
    }
}

fn run(base: &RunConfig, seed: u64, edit: impl FnOnce(&mut RunConfig)) -> Result<Vec<ShotRecord>> {
    let mut config = base.clone();
    config.master_seed = seed;
    edit(&mut config);
    Ok(run_experiment(&config)?)
}

/// Runs the preset with master seed `seed` and reduces the shots.
pub fn execute(preset: &ExperimentPreset, seed: u64) -> Result<Outputs> {
    preset.base.validate().map_err(CliError::Invalid)?;
    let seeds = Seeds(seed);
    match (&preset.name, &preset.sweep) {
        (
            _,
            Sweep::Spectra {
                stored_means,
                detunings,
            },
        ) => spectra(&preset.base, &seeds, stored_means, detunings),
        (_, Sweep::Histogram { detunings }) => histogram(&preset.base, &seeds, detunings),
        (_, Sweep::SourceStrength { windows, strengths }) => gain_curve(&preset.base, &seeds, windows, strengths),
        (_, Sweep::Retrieval { strengths }) => retrieval(&preset.base, &seeds, strengths),
        (PresetName::G2, Sweep::Single) => correlation(&preset.base, &seeds),
        (_, Sweep::Single) => single(&preset.base, &seeds),
    }
}

fn resonant_index(detunings: &[f64]) -> Result<usize> {
    detunings
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| CliError::Usage("empty detuning grid".into()))
}

fn spectra(base: &RunConfig, seeds: &Seeds, stored_means: &[f64], detunings: &[f64]) -> Result<Outputs> {
    let reference_group = stored_means
        .iter()
        .position(|&s| s == 0.0)
        .ok_or_else(|| CliError::Usage("spectra need a gate-free (zero stored mean) group".into()))?;
    let resonant = resonant_index(detunings)?;
    let mut runs: Vec<Vec<Vec<ShotRecord>>> = Vec::with_capacity(stored_means.len());
    for (g, &stored) in stored_means.iter().enumerate() {
        let mut group = Vec::with_capacity(detunings.len());
        for (d, &detuning) in detunings.iter().enumerate() {
            group.push(run(base, seeds.run(g as u64, d), |c| {
                c.gate = GatePulse::with_stored_mean(stored);
                c.source.detuning = detuning;
            })?);
        }
        runs.push(group);
    }
    let reference_runs = &runs[reference_group][resonant];
    let reference = mean_sem(reference_runs.iter().map(|r| r.detected_source as f64));
    let mut summary = Summary::new();
    summary.insert("transmission_reference_counts".into(), reference);
    let mut tables = Vec::new();
    let mut contrast = Table::new("contrast.csv", &["stored_mean", "contrast", "contrast_err", "bound"]);
    for (g, &stored) in stored_means.iter().enumerate() {
        let groups: Vec<(f64, &[ShotRecord])> = detunings
            .iter()
            .zip(&runs[g])
            .map(|(&d, r)| (d, r.as_slice()))
            .collect();
        let spectrum = average_spectrum(&groups, reference.value)?;
        let mut table = Table::new(
            format!("spectrum_ng{}.csv", label(stored)),
            &["detuning_mhz", "mean_transmission", "sem"],
        );
        for i in 0..spectrum.detunings.len() {
            table.push([
                num(angular_to_mhz(spectrum.detunings[i])),
                num(spectrum.mean_transmission[i]),
                num(spectrum.sem[i]),
            ]);
        }
        tables.push(table);
        if g != reference_group {
            let c = switching_contrast(&runs[g][resonant], reference_runs)?;
            let bound = contrast_bound(stored);
            contrast.push([num(stored), num(c.value), num(c.sigma()), num(bound)]);
            summary.insert(format!("contrast_ng{}", label(stored)), c);
            summary.insert(format!("contrast_bound_ng{}", label(stored)), Estimate::exact(bound));
        }
    }
    tables.push(contrast);
    Ok(Outputs {
        tables,
        summary,
        notes: Vec::new(),
    })
}

/// Bins of the fig3 histograms: one count per bin up to 47, overflow in the last.
pub const HISTOGRAM_BINNING: CountBinning = CountBinning {
    bin_width: 1,
    n_bins: 48,
};

fn histogram(base: &RunConfig, seeds: &Seeds, detunings: &[f64]) -> Result<Outputs> {
    let resonant = resonant_index(detunings)?;
    let stored = base.gate.mean_stored();
    let mut panels: Vec<(&str, Vec<Vec<ShotRecord>>)> = Vec::new();
    for (g, (panel, mean)) in [("no_gate", 0.0), ("gate", stored)].into_iter().enumerate() {
        let mut columns = Vec::with_capacity(detunings.len());
        for (d, &detuning) in detunings.iter().enumerate() {
            columns.push(run(base, seeds.run(g as u64, d), |c| {
                c.gate = GatePulse::with_stored_mean(mean);
                c.source.detuning = detuning;
            })?);
        }
        panels.push((panel, columns));
    }
    let mut table = Table::new("histogram.csv", &["panel", "detuning_mhz", "detected_counts", "rate"]);
    let mut summary = Summary::new();
    let mut notes = Vec::new();
    for (panel, columns) in &panels {
        let cols: Vec<(f64, &[ShotRecord])> = detunings.iter().zip(columns).map(|(&d, r)| (d, r.as_slice())).collect();
        let h = build_histogram(&cols, HISTOGRAM_BINNING)?;
        for (d, rates) in h.detunings.iter().zip(&h.rates) {
            for (bin, rate) in rates.iter().enumerate() {
                table.push([
                    panel.to_string(),
                    num(angular_to_mhz(*d)),
                    (bin as u64 * HISTOGRAM_BINNING.bin_width).to_string(),
                    num(*rate),
                ]);
            }
        }
    }
    let no_gate = &panels[0].1[resonant];
    let gated = &panels[1].1[resonant];
    summary.insert(
        "zero_gate_peak_counts".into(),
        mean_sem(no_gate.iter().map(|r| r.detected_source as f64)),
    );
    // components of the gated resonant column, labelled by the stored photon number
    let high = mean_sem(
        gated
            .iter()
            .filter(|r| r.n_stored == 0)
            .map(|r| r.detected_source as f64),
    );
    let low = mean_sem(
        gated
            .iter()
            .filter(|r| r.n_stored > 0)
            .map(|r| r.detected_source as f64),
    );
    summary.insert("high_component_counts".into(), high);
    summary.insert("low_component_counts".into(), low);
    summary.insert("extinction_factor".into(), ratio(high, low));
    match split_by_threshold(gated) {
        Ok(split) => {
            summary.insert(
                "extinction_factor_threshold".into(),
                Estimate::exact(split.extinction_factor()),
            );
            if let Some(t) = split.threshold {
                summary.insert("valley_threshold_counts".into(), Estimate::exact(t as f64));
            }
        }
        Err(e) => notes.push(format!("threshold split: {e}")),
    }
    let gate_shots = gated.iter().filter(|r| r.n_stored > 0).count() as f64;
    let single = gated.iter().filter(|r| r.n_stored == 1).count() as f64;
    let p = single / gate_shots;
    summary.insert(
        "p_single_given_gate".into(),
        Estimate::symmetric(p, (p * (1.0 - p) / gate_shots).sqrt()),
    );
    Ok(Outputs {
        tables: vec![table],
        summary,
        notes,
    })
}

/// Small-signal slope of the gain curve, `1 - <T>` over shots with at
/// least one stored excitation, on resonance.
pub fn predicted_gain_slope(config: &RunConfig) -> f64 {
    let lambda = config.gate.mean_stored();
    let p_gate = contrast_bound(lambda);
    if p_gate <= 0.0 {
        return f64::NAN;
    }
    match config.coupling {
        CouplingModel::Effective { extinction: eta, .. } => {
            let mut p = (-lambda).exp();
            let mut blocked = 0.0;
            for n in 1..1000 {
                p *= lambda / f64::from(n);
                blocked += p * (1.0 - extinction(f64::from(n) * eta).unwrap_or(1.0));
                if p < 1e-18 && f64::from(n) > lambda {
                    break;
                }
            }
            blocked / p_gate
        }
        CouplingModel::Sampled(model) => {
            // Monte-Carlo over the photon number and the per-atom couplings
            let mut rng = shot_rng(0x51_09e, 0);
            let samples = 200_000;
            let mut blocked = 0.0;
            let mut taken = 0u32;
            while taken < samples {
                let n = poisson(&mut rng, lambda);
                if n == 0 {
                    continue;
                }
                let eta: f64 = (0..n).map(|_| sample_cooperativity(&model, &mut rng)).sum();
                blocked += 1.0 - extinction(eta).unwrap_or(1.0);
                taken += 1;
            }
            blocked / f64::from(samples)
        }
    }
}

fn slope_with_error(xs: &[f64], ys: &[f64]) -> Result<Estimate> {
    let fit = fit_linear(xs, ys)?;
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let ss: f64 = fit.residuals.iter().map(|r| r * r).sum();
    Ok(Estimate::symmetric(fit.slope, (ss / (n - 2.0) / sxx).sqrt()))
}

fn gain_curve(base: &RunConfig, seeds: &Seeds, windows: &[f64], strengths: &[f64]) -> Result<Outputs> {
    let mut tables = Vec::new();
    let mut summary = Summary::new();
    let mut notes = Vec::new();
    let prediction = predicted_gain_slope(base);
    summary.insert("gain_slope_prediction".into(), Estimate::exact(prediction));
    for (w, &window) in windows.iter().enumerate() {
        let suffix = format!("{}us", label(seconds_to_us(window)));
        let mut table = Table::new(
            format!("gain_{suffix}.csv"),
            &[
                "nominal_source",
                "source_strength_intracavity",
                "gain_intracavity",
                "gain_intracavity_err_low",
                "gain_intracavity_err_high",
                "source_strength_outside",
                "gain_outside",
                "gain_outside_err_low",
                "gain_outside_err_high",
            ],
        );
        let (mut xs, mut inside, mut outside) = (Vec::new(), Vec::new(), Vec::new());
        for (s, &strength) in strengths.iter().enumerate() {
            let records = run(base, seeds.run(w as u64, s), |c| {
                c.timing.source_window = window;
                c.source = SourceDrive::resonant(strength);
            })?;
            let boot = seeds.bootstrap(((w as u64) << 32) | s as u64);
            let gi = gain(&records, PhotonUnits::Intracavity, Classifier::GroundTruth, boot)?;
            let go = gain(&records, PhotonUnits::Outside, Classifier::GroundTruth, boot)?;
            table.push([
                num(strength),
                num(gi.source_strength.value),
                num(gi.gain.value),
                num(gi.gain.err_low),
                num(gi.gain.err_high),
                num(go.source_strength.value),
                num(go.gain.value),
                num(go.gain.err_low),
                num(go.gain.err_high),
            ]);
            xs.push(gi.source_strength.value);
            inside.push(gi.gain);
            outside.push(go.gain);
        }
        tables.push(table);
        let ys: Vec<f64> = inside.iter().map(|g| g.value).collect();
        if xs.len() >= LINEAR_FIT_POINTS {
            let slope = slope_with_error(&xs[..LINEAR_FIT_POINTS], &ys[..LINEAR_FIT_POINTS])?;
            summary.insert(format!("gain_slope_{suffix}"), slope);
            summary.insert(format!("gain_slope_ratio_{suffix}"), slope.scaled(1.0 / prediction));
        }
        let peak = |gains: &[Estimate]| gains.iter().copied().max_by(|a, b| a.value.total_cmp(&b.value));
        if let (Some(pi), Some(po)) = (peak(&inside), peak(&outside)) {
            summary.insert(format!("peak_gain_intracavity_{suffix}"), pi);
            summary.insert(format!("peak_gain_outside_{suffix}"), po);
        }
        match fit_saturation(&xs, &ys) {
            Ok(fit) => {
                summary.insert(format!("saturation_scale_{suffix}"), Estimate::exact(fit.scale));
                summary.insert(format!("saturation_amplitude_{suffix}"), Estimate::exact(fit.amplitude));
            }
            Err(e) => notes.push(format!("saturation fit ({suffix}): {e}")),
        }
    }
    Ok(Outputs { tables, summary, notes })
}

fn retrieval(base: &RunConfig, seeds: &Seeds, strengths: &[f64]) -> Result<Outputs> {
    let mut runs = Vec::with_capacity(strengths.len());
    for (s, &strength) in strengths.iter().enumerate() {
        runs.push(run(base, seeds.run(0, s), |c| {
            c.source = SourceDrive::resonant(strength);
        })?);
    }
    let points: Vec<RetrievalPoint> = strengths
        .iter()
        .zip(&runs)
        .map(|(&nominal_source, records)| RetrievalPoint {
            nominal_source,
            records,
        })
        .collect();
    let background = base.background_means().0;
    let single = retrieval_curve(
        &points,
        RetrievalSelection::SingleExcitation,
        background,
        seeds.bootstrap(0),
    )?;
    let all = retrieval_curve(&points, RetrievalSelection::AllShots, background, seeds.bootstrap(1))?;
    let mut table = Table::new(
        "retrieval.csv",
        &[
            "nominal_source",
            "strength_intracavity",
            "strength_outside",
            "fraction_single_excitation",
            "fraction_all_shots",
        ],
    );
    for (i, &strength) in strengths.iter().enumerate() {
        table.push([
            num(strength),
            num(single.strengths_intracavity[i]),
            num(single.strengths_outside[i]),
            num(single.fractions[i]),
            num(all.fractions[i]),
        ]);
    }
    let mut summary = Summary::new();
    summary.insert("m_s0_intracavity".into(), single.m_s0_intracavity);
    summary.insert("m_s0_outside".into(), single.m_s0_outside);
    summary.insert("m_s0_intracavity_all_shots".into(), all.m_s0_intracavity);
    summary.insert("m_s0_outside_all_shots".into(), all.m_s0_outside);
    summary.insert("fit_amplitude".into(), Estimate::exact(single.fit_amplitude));
    for (i, r) in single.residuals.iter().enumerate() {
        summary.insert(format!("fit_residual_{i:02}"), Estimate::exact(*r));
    }
    let rms = (single.residuals.iter().map(|r| r * r).sum::<f64>() / single.residuals.len() as f64).sqrt();
    summary.insert("fit_rms_residual".into(), Estimate::exact(rms));

    // gain at the source strength that reduces retrieval by 1/e
    let m_s0 = single.m_s0_intracavity.value;
    let records = run(base, seeds.run(1, 0), |c| c.source = SourceDrive::resonant(m_s0))?;
    let gi = gain(
        &records,
        PhotonUnits::Intracavity,
        Classifier::GroundTruth,
        seeds.bootstrap(2),
    )?;
    let go = gain(
        &records,
        PhotonUnits::Outside,
        Classifier::GroundTruth,
        seeds.bootstrap(2),
    )?;
    summary.insert("gain_retrieval_intracavity".into(), gi.gain);
    summary.insert("gain_retrieval_outside".into(), go.gain);
    summary.insert(
        "gain_retrieval_outside_ratio".into(),
        Estimate::exact(go.gain.value / gi.gain.value),
    );
    Ok(Outputs {
        tables: vec![table],
        summary,
        notes: Vec::new(),
    })
}

fn correlation(base: &RunConfig, seeds: &Seeds) -> Result<Outputs> {
    let records = run(base, seeds.run(0, 0), |_| {})?;
    let gate: Vec<u64> = records.iter().map(|r| r.detected_gate).collect();
    let source: Vec<u64> = records.iter().map(|r| r.detected_source).collect();
    let c = g2_cross(&gate, &source, base.background_means(), seeds.bootstrap(0))?;
    let mut joint: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for (&g, &s) in gate.iter().zip(&source) {
        *joint.entry((g, s)).or_default() += 1;
    }
    let mut table = Table::new("coincidences.csv", &["gate_counts", "source_counts", "shots"]);
    for ((g, s), n) in joint {
        table.push([g.to_string(), s.to_string(), n.to_string()]);
    }
    let mut summary = Summary::new();
    summary.insert("g2_raw".into(), c.raw);
    summary.insert("g2_corrected".into(), c.corrected);
    summary.insert("mean_gate_counts".into(), Estimate::exact(c.mean_gate));
    summary.insert("mean_source_counts".into(), Estimate::exact(c.mean_source));
    Ok(Outputs {
        tables: vec![table],
        summary,
        notes: Vec::new(),
    })
}

type Column = (&'static str, fn(&ShotRecord) -> f64);

fn single(base: &RunConfig, seeds: &Seeds) -> Result<Outputs> {
    let records = run(base, seeds.run(0, 0), |_| {})?;
    let mut summary = Summary::new();
    let mut notes = Vec::new();
    let columns: [Column; 8] = [
        ("mean_stored", |r| f64::from(r.n_stored)),
        ("mean_attempted", |r| r.source_attempted as f64),
        ("mean_transmitted_intracavity", |r| {
            r.source_transmitted_intracavity as f64
        }),
        ("mean_transmitted_outside", |r| r.source_transmitted_outside as f64),
        ("mean_detected_source", |r| r.detected_source as f64),
        ("mean_detected_gate", |r| r.detected_gate as f64),
        ("collapsed_fraction", |r| f64::from(u8::from(r.collapsed))),
        ("retrieved_fraction", |r| f64::from(u8::from(r.retrieved))),
    ];
    let mut header = vec!["n_shots"];
    let mut row = vec![records.len().to_string()];
    for (name, f) in columns {
        let e = mean_sem(records.iter().map(f));
        header.push(name);
        row.push(num(e.value));
        summary.insert(name.to_string(), e);
    }
    let mut table = Table::new("point.csv", &header);
    table.push(row);
    let boot = seeds.bootstrap(0);
    match (
        gain(&records, PhotonUnits::Intracavity, Classifier::GroundTruth, boot),
        gain(&records, PhotonUnits::Outside, Classifier::GroundTruth, boot),
    ) {
        (Ok(gi), Ok(go)) => {
            summary.insert("gain_intracavity".into(), gi.gain);
            summary.insert("gain_outside".into(), go.gain);
        }
        (Err(e), _) | (_, Err(e)) => notes.push(format!("gain: {e}")),
    }
    if base.retrieval_mode {
        let gate: Vec<u64> = records.iter().map(|r| r.detected_gate).collect();
        let source: Vec<u64> = records.iter().map(|r| r.detected_source).collect();
        match g2_cross(&gate, &source, base.background_means(), boot) {
            Ok(c) => {
                summary.insert("g2_raw".into(), c.raw);
                summary.insert("g2_corrected".into(), c.corrected);
            }
            Err(e) => notes.push(format!("g2: {e}")),
        }
    }
    Ok(Outputs {
        tables: vec![table],
        summary,
        notes,
    })
}
