//! Statistical properties of the samplers, the engine, and the estimators.

use sptsim_core::engine::{evolve_source_window, run_experiment, run_experiment_serial, Coupling, SpinWave};
use sptsim_core::qed::{cavity_transmission_spectrum, extinction, free_space_scatter_prob};
use sptsim_core::rng::shot_rng;
use sptsim_core::sampling::{binomial, poisson};
use sptsim_core::stats::{
    build_histogram, contrast_bound, g2_cross, gain, switching_contrast, BootstrapConfig, Classifier, CountBinning,
    PhotonUnits,
};
use sptsim_core::units::{mhz_to_angular, us_to_seconds};
use sptsim_core::{
    AtomParams, CavityParams, CouplingModel, DetectionChain, GatePulse, PumpingModel, RunConfig, SourceDrive,
    TimingSequence,
};

const DRAWS: usize = 1_000_000;

/// Sample mean and unbiased variance.
fn moments(xs: &[u64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Checks mean and variance against a distribution with the given mean,
/// variance, and fourth central moment, at 5 sigma.
fn assert_moments(xs: &[u64], mean: f64, var: f64, mu4: f64) {
    let n = xs.len() as f64;
    let (m, v) = moments(xs);
    let sigma_mean = (var / n).sqrt();
    let sigma_var = ((mu4 - var * var) / n).sqrt();
    assert!(
        (m - mean).abs() < 5.0 * sigma_mean,
        "mean {m} vs {mean} (sigma {sigma_mean})"
    );
    assert!(
        (v - var).abs() < 5.0 * sigma_var,
        "variance {v} vs {var} (sigma {sigma_var})"
    );
}

#[test]
fn poisson_moments() {
    for (seed, mu) in [(1u64, 0.4), (2, 17.0), (3, 640.0)] {
        let mut rng = shot_rng(seed, 0);
        let xs: Vec<u64> = (0..DRAWS).map(|_| poisson(&mut rng, mu)).collect();
        assert_moments(&xs, mu, mu, mu + 3.0 * mu * mu);
    }
}

#[test]
fn binomial_moments() {
    for (seed, n, p) in [(4u64, 1000u64, 0.5), (5, 64, 0.264), (6, 3, 0.15)] {
        let mut rng = shot_rng(seed, 0);
        let xs: Vec<u64> = (0..DRAWS).map(|_| binomial(&mut rng, n, p)).collect();
        let q = p * (1.0 - p);
        let nf = n as f64;
        let var = nf * q;
        let mu4 = nf * q * (1.0 + 3.0 * (nf - 2.0) * q);
        assert_moments(&xs, nf * p, var, mu4);
    }
}

#[test]
fn thinned_poisson_is_poisson() {
    let (mu, p) = (40.0, 0.264);
    let mut rng = shot_rng(7, 0);
    let xs: Vec<u64> = (0..DRAWS)
        .map(|_| {
            let n = poisson(&mut rng, mu);
            binomial(&mut rng, n, p)
        })
        .collect();
    let lambda = mu * p;
    assert_moments(&xs, lambda, lambda, lambda + 3.0 * lambda * lambda);
}

#[test]
fn collapse_count_is_geometric() {
    // one excitation, constant coupling, no pumping, far more photons than needed
    let eta = 3.3;
    let p = free_space_scatter_prob(eta).unwrap();
    let shots = 100_000u64;
    let tail_from = 15usize;
    let mut observed = vec![0f64; tail_from + 1];
    let cavity = CavityParams::default();
    let atoms = AtomParams::default();
    for i in 0..shots {
        let mut rng = shot_rng(11, i);
        let spin = SpinWave::with_couplings(vec![Coupling::uniform(eta)]);
        let (out, _) = evolve_source_window(
            spin,
            &SourceDrive::resonant(1000.0),
            &PumpingModel::disabled(),
            &cavity,
            &atoms,
            &mut rng,
        )
        .unwrap();
        let k = out.photons_to_collapse.expect("a 1000-photon pulse always collapses") as usize;
        observed[k.min(tail_from)] += 1.0;
    }
    let n = shots as f64;
    let mut chi2 = 0.0;
    for (k, &obs) in observed.iter().enumerate().skip(1) {
        let prob = if k < tail_from {
            (1.0 - p).powi(k as i32 - 1) * p
        } else {
            (1.0 - p).powi(tail_from as i32 - 1)
        };
        let expected = n * prob;
        chi2 += (obs - expected).powi(2) / expected;
    }
    // 15 cells, no fitted parameters: 14 degrees of freedom, 99.9% quantile
    assert!(chi2 < 36.12, "chi-square {chi2}");
    let mean: f64 = observed.iter().enumerate().map(|(k, &c)| k as f64 * c).sum::<f64>() / n;
    // the capped tail pulls the mean down slightly; bound it loosely
    assert!((mean - (1.0 + eta).powi(2) / (2.0 * eta)).abs() < 0.1, "mean {mean}");
}

fn half_max_crossing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn empty_cavity_fwhm_equals_kappa() {
    let cavity = CavityParams::default();
    let atoms = AtomParams::default();
    let t = |d: f64| cavity_transmission_spectrum(d, &[], &cavity, &atoms).unwrap();
    let right = half_max_crossing(t, 0.0, 10.0 * cavity.kappa);
    let left = -half_max_crossing(|d| t(-d), 0.0, 10.0 * cavity.kappa);
    let fwhm = right - left;
    assert!(
        (fwhm / cavity.kappa - 1.0).abs() < 0.01,
        "fwhm {fwhm} kappa {}",
        cavity.kappa
    );
}

#[test]
fn simulated_empty_cavity_fwhm_equals_kappa() {
    let base = RunConfig {
        detection: DetectionChain::ideal(),
        n_shots: 20_000,
        ..RunConfig::default()
    };
    let kappa = base.cavity.kappa;
    let mean_at = |delta: f64, seed: u64| {
        let cfg = RunConfig {
            source: SourceDrive {
                mean_source_photons: 400.0,
                detuning: delta,
            },
            master_seed: seed,
            ..base.clone()
        };
        let r = run_experiment(&cfg).unwrap();
        r.iter().map(|s| s.source_transmitted_intracavity as f64).sum::<f64>() / r.len() as f64
    };
    let peak = mean_at(0.0, 1);
    // bracket the half-maximum on each side and interpolate linearly
    let crossing = |sign: f64, seed: u64| {
        let (a, b) = (0.45 * kappa, 0.55 * kappa);
        let (fa, fb) = (mean_at(sign * a, seed) / peak, mean_at(sign * b, seed + 1) / peak);
        a + (fa - 0.5) / (fa - fb) * (b - a)
    };
    let fwhm = crossing(1.0, 10) + crossing(-1.0, 20);
    assert!((fwhm / kappa - 1.0).abs() < 0.01, "fwhm/kappa {}", fwhm / kappa);
}

#[test]
fn blocking_persists_after_collapse() {
    let eta = 1.5;
    let m = 200.0;
    let cfg = RunConfig {
        coupling: CouplingModel::constant(eta),
        gate: GatePulse::with_stored_mean(0.4),
        pumping: PumpingModel::disabled(),
        source: SourceDrive::resonant(m),
        timing: TimingSequence::source_only(us_to_seconds(24.0)),
        n_shots: 50_000,
        master_seed: 8,
        ..RunConfig::default()
    };
    let r = run_experiment(&cfg).unwrap();
    let single: Vec<f64> = r
        .iter()
        .filter(|s| s.n_stored == 1)
        .map(|s| s.source_transmitted_intracavity as f64)
        .collect();
    assert!(r.iter().filter(|s| s.n_stored == 1).all(|s| s.collapsed));
    let n = single.len() as f64;
    let mean = single.iter().sum::<f64>() / n;
    let t = extinction(eta).unwrap();
    let expected = m * t;
    // Poisson(m T) per shot
    let sigma = (expected / n).sqrt();
    assert!((mean - expected).abs() < 5.0 * sigma, "{mean} vs {expected}");
}

#[test]
fn collapsed_shots_are_never_retrieved() {
    let cfg = RunConfig {
        gate: GatePulse::with_stored_mean(1.0),
        source: SourceDrive::resonant(3.0),
        retrieval_mode: true,
        detection: DetectionChain::ideal(),
        n_shots: 100_000,
        master_seed: 9,
        ..RunConfig::default()
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(r.iter().any(|s| s.retrieved));
    assert!(r.iter().any(|s| s.collapsed));
    for s in &r {
        assert!(!(s.collapsed && s.retrieved), "{s:?}");
        assert!(!s.retrieved || s.n_stored > 0);
        assert!(s.source_transmitted_outside <= s.source_transmitted_intracavity);
        assert!(s.source_transmitted_intracavity <= s.source_attempted);
        assert_eq!(s.collapsed, s.n_scattered > 0);
    }
}

#[test]
fn independent_channels_have_unit_g2() {
    // zero coupling: the stored gate neither blocks nor gets destroyed
    let cfg = RunConfig {
        coupling: CouplingModel::constant(0.0),
        gate: GatePulse::with_stored_mean(1.0),
        source: SourceDrive::resonant(1.0),
        retrieval_mode: true,
        n_shots: 1_000_000,
        master_seed: 10,
        ..RunConfig::default()
    };
    let r = run_experiment(&cfg).unwrap();
    let g: Vec<u64> = r.iter().map(|s| s.detected_gate).collect();
    let s: Vec<u64> = r.iter().map(|s| s.detected_source).collect();
    let c = g2_cross(&g, &s, cfg.background_means(), BootstrapConfig::default()).unwrap();
    assert!((c.raw.value - 1.0).abs() < 3.0 * c.raw.sigma(), "{:?}", c.raw);
    assert!(
        (c.corrected.value - 1.0).abs() < 3.0 * c.corrected.sigma(),
        "{:?}",
        c.corrected
    );
}

#[test]
fn serial_and_parallel_runs_are_identical() {
    let cfg = RunConfig {
        gate: GatePulse::with_stored_mean(0.5),
        source: SourceDrive {
            mean_source_photons: 60.0,
            detuning: mhz_to_angular(0.05),
        },
        timing: TimingSequence::source_only(us_to_seconds(24.0)),
        retrieval_mode: true,
        n_shots: 20_000,
        master_seed: 0xdead_beef,
        ..RunConfig::default()
    };
    let serial = run_experiment_serial(&cfg).unwrap();
    let bytes = |r: &[sptsim_core::ShotRecord]| format!("{r:?}").into_bytes();
    let reference = bytes(&serial);
    for threads in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let parallel = pool.install(|| run_experiment(&cfg)).unwrap();
        assert_eq!(bytes(&parallel), reference, "{threads} threads");
    }
}

#[test]
fn histogram_columns_are_normalized() {
    let runs: Vec<(f64, Vec<sptsim_core::ShotRecord>)> = [-0.2, -0.05, 0.0, 0.1]
        .iter()
        .enumerate()
        .map(|(k, &mhz)| {
            let cfg = RunConfig {
                gate: GatePulse::with_stored_mean(0.5),
                source: SourceDrive {
                    mean_source_photons: 64.0,
                    detuning: mhz_to_angular(mhz),
                },
                timing: TimingSequence::source_only(us_to_seconds(24.0)),
                n_shots: 3_001 + k as u64,
                master_seed: k as u64,
                ..RunConfig::default()
            };
            (cfg.source.detuning, run_experiment(&cfg).unwrap())
        })
        .collect();
    let columns: Vec<(f64, &[sptsim_core::ShotRecord])> = runs.iter().map(|(d, r)| (*d, r.as_slice())).collect();
    for binning in [
        CountBinning::unit(40),
        CountBinning {
            bin_width: 3,
            n_bins: 7,
        },
    ] {
        let h = build_histogram(&columns, binning).unwrap();
        for col in &h.rates {
            assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn gain_by_threshold_tracks_ground_truth() {
    let cfg = RunConfig {
        gate: GatePulse::with_stored_mean(0.4),
        source: SourceDrive::resonant(300.0),
        timing: TimingSequence::source_only(us_to_seconds(50.0)),
        n_shots: 20_000,
        master_seed: 12,
        ..RunConfig::default()
    };
    let r = run_experiment(&cfg).unwrap();
    let boot = BootstrapConfig::default();
    let truth = gain(&r, PhotonUnits::Outside, Classifier::GroundTruth, boot).unwrap();
    let counts: Vec<u64> = r.iter().map(|s| s.detected_source).collect();
    let t = sptsim_core::stats::histogram::valley_threshold(&counts).unwrap();
    let thr = gain(&r, PhotonUnits::Outside, Classifier::Threshold(t), boot).unwrap();
    let rel = (thr.gain.value - truth.gain.value).abs() / truth.gain.value;
    assert!(rel < 0.03, "truth {:?} threshold {:?}", truth.gain, thr.gain);
}

#[test]
fn switching_contrast_respects_vacuum_bound() {
    let base = RunConfig {
        source: SourceDrive::resonant(64.0),
        timing: TimingSequence::source_only(us_to_seconds(24.0)),
        n_shots: 10_000,
        ..RunConfig::default()
    };
    let without = run_experiment(&RunConfig {
        master_seed: 100,
        ..base.clone()
    })
    .unwrap();
    for (k, stored) in [0.4, 1.4, 2.9].into_iter().enumerate() {
        let with = run_experiment(&RunConfig {
            gate: GatePulse::with_stored_mean(stored),
            master_seed: 101 + k as u64,
            ..base.clone()
        })
        .unwrap();
        let c = switching_contrast(&with, &without).unwrap();
        assert!(c.value <= contrast_bound(stored) + 3.0 * c.sigma(), "{stored}: {c:?}");
        assert!(c.value > 0.0);
    }
}
