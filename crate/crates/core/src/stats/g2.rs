use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::bootstrap::{bootstrap, BootstrapConfig, Compressed};
use crate::stats::Estimate;

/// Normalized gate-source cross-correlation, raw and with the detector
/// backgrounds removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelation {
    pub raw: Estimate,
    pub corrected: Estimate,
    pub mean_gate: f64,
    pub mean_source: f64,
}

struct Moments {
    gate: f64,
    source: f64,
    joint: f64,
}

fn moments(rows: &[((u64, u64), u64)]) -> Option<Moments> {
    let (mut n, mut g, mut s, mut gs) = (0u64, 0u64, 0u64, 0u64);
    for &((ng, ns), count) in rows {
        n += count;
        g += ng * count;
        s += ns * count;
        gs += ng * ns * count;
    }
    (n > 0).then(|| {
        let n = n as f64;
        Moments {
            gate: g as f64 / n,
            source: s as f64 / n,
            joint: gs as f64 / n,
        }
    })
}

fn raw(m: &Moments) -> Option<f64> {
    (m.gate > 0.0 && m.source > 0.0).then(|| m.joint / (m.gate * m.source))
}

/// Subtracts independent Poisson backgrounds of means `bg_gate`, `bg_source`
/// from the joint and single-channel moments.
fn corrected(m: &Moments, bg_gate: f64, bg_source: f64) -> Option<f64> {
    let gate = m.gate - bg_gate;
    let source = m.source - bg_source;
    if gate <= 0.0 || source <= 0.0 {
        return None;
    }
    let joint = m.joint - bg_gate * m.source - bg_source * m.gate + bg_gate * bg_source;
    Some(joint / (gate * source))
}

/// `g2 = <n_g n_s> / (<n_g> <n_s>)` from paired per-shot counts, with
/// percentile-bootstrap intervals. `backgrounds` are the mean dark counts
/// per shot of the (gate, source) detectors.
pub fn g2_cross(
    gate_counts: &[u64],
    source_counts: &[u64],
    backgrounds: (f64, f64),
    boot: BootstrapConfig,
) -> Result<CrossCorrelation> {
    if gate_counts.len() != source_counts.len() {
        return Err(Error::Domain {
            field: "g2_cross",
            reason: format!(
                "{} gate counts for {} source counts",
                gate_counts.len(),
                source_counts.len()
            ),
        });
    }
    let data = Compressed::from_items(gate_counts.iter().copied().zip(source_counts.iter().copied()));
    let m = moments(&data.rows).ok_or(Error::Empty("coincidence data"))?;
    if m.gate == 0.0 {
        return Err(Error::ZeroDenominator("gate channel mean"));
    }
    if m.source == 0.0 {
        return Err(Error::ZeroDenominator("source channel mean"));
    }
    let (bg_gate, bg_source) = backgrounds;
    if corrected(&m, bg_gate, bg_source).is_none() {
        return Err(Error::ZeroDenominator("background-corrected channel mean"));
    }
    let raw_est = bootstrap(&data, boot, |rows| moments(rows).as_ref().and_then(raw))?;
    let corr_est = bootstrap(&data, boot, |rows| {
        moments(rows).and_then(|m| corrected(&m, bg_gate, bg_source))
    })?;
    Ok(CrossCorrelation {
        raw: raw_est,
        corrected: corr_est,
        mean_gate: m.gate,
        mean_source: m.source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::shot_rng;
    use crate::sampling::poisson;

    #[test]
    fn independent_channels_are_uncorrelated() {
        let mut rng = shot_rng(21, 0);
        let n = 100_000;
        let g: Vec<u64> = (0..n).map(|_| poisson(&mut rng, 0.2)).collect();
        let s: Vec<u64> = (0..n).map(|_| poisson(&mut rng, 0.1)).collect();
        let c = g2_cross(&g, &s, (0.0, 0.0), BootstrapConfig::default()).unwrap();
        assert!((c.raw.value - 1.0).abs() < 3.0 * c.raw.sigma(), "{:?}", c.raw);
        assert_eq!(c.raw.value, c.corrected.value);
    }

    #[test]
    fn perfect_anticorrelation() {
        let g = [1, 0, 1, 0, 0, 1];
        let s = [0, 1, 0, 2, 1, 0];
        let c = g2_cross(&g, &s, (0.0, 0.0), BootstrapConfig::default()).unwrap();
        assert_eq!(c.raw.value, 0.0);
    }

    #[test]
    fn background_correction_recovers_signal() {
        // signal fully anticorrelated, plus exact background expectations
        let m = Moments {
            gate: 0.1 + 0.02,
            source: 0.1 + 0.01,
            joint: 0.0 + 0.02 * 0.1 + 0.01 * 0.1 + 0.02 * 0.01,
        };
        let c = corrected(&m, 0.02, 0.01).unwrap();
        assert!(c.abs() < 1e-12, "{c}");
        assert!(raw(&m).unwrap() > 0.2);
    }

    #[test]
    fn zero_channel_is_error() {
        let g = [0, 0, 0];
        let s = [1, 0, 2];
        assert!(matches!(
            g2_cross(&g, &s, (0.0, 0.0), BootstrapConfig::default()),
            Err(Error::ZeroDenominator(_))
        ));
        assert!(g2_cross(&[1], &[1, 2], (0.0, 0.0), BootstrapConfig::default()).is_err());
    }
}
