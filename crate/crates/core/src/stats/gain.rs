use serde::{Deserialize, Serialize};

use crate::engine::ShotRecord;
use crate::error::{Error, Result};
use crate::stats::bootstrap::{bootstrap, BootstrapConfig, Compressed};
use crate::stats::Estimate;

/// Where transmitted source photons are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhotonUnits {
    /// Photons leaving the cavity mode, before outcoupling loss.
    Intracavity,
    /// Photons available outside the output mirror.
    Outside,
}

impl PhotonUnits {
    pub fn transmitted(self, r: &ShotRecord) -> u64 {
        match self {
            Self::Intracavity => r.source_transmitted_intracavity,
            Self::Outside => r.source_transmitted_outside,
        }
    }
}

/// How shots are assigned to the gate-present component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classifier {
    /// At least one stored excitation.
    GroundTruth,
    /// Detected source counts at or below the threshold.
    Threshold(u64),
}

impl Classifier {
    pub fn gate_present(self, r: &ShotRecord) -> bool {
        match self {
            Self::GroundTruth => r.n_stored > 0,
            Self::Threshold(t) => r.detected_source <= t,
        }
    }
}

/// Gate-induced change of the transmitted source photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub gain: Estimate,
    /// Mean transmitted photon number without gate.
    pub source_strength: Estimate,
    pub units: PhotonUnits,
}

fn component_means(rows: &[((bool, u64), u64)]) -> Option<(f64, f64)> {
    let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0u64, 0.0, 0u64);
    for &((present, value), count) in rows {
        if present {
            s1 += (value * count) as f64;
            n1 += count;
        } else {
            s0 += (value * count) as f64;
            n0 += count;
        }
    }
    (n0 > 0 && n1 > 0).then(|| (s0 / n0 as f64, s1 / n1 as f64))
}

/// `<M_s>|no gate - <M_s>|gate`, with percentile-bootstrap errors.
pub fn gain(
    records: &[ShotRecord],
    units: PhotonUnits,
    classifier: Classifier,
    boot: BootstrapConfig,
) -> Result<GainEstimate> {
    let data = Compressed::from_items(
        records
            .iter()
            .map(|r| (classifier.gate_present(r), units.transmitted(r))),
    );
    if component_means(&data.rows).is_none() {
        return Err(Error::Empty("gain component"));
    }
    let gain = bootstrap(&data, boot, |rows| component_means(rows).map(|(off, on)| off - on))?;
    let source_strength = bootstrap(&data, boot, |rows| component_means(rows).map(|(off, _)| off))?;
    Ok(GainEstimate {
        gain,
        source_strength,
        units,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shot(n_stored: u32, transmitted: u64) -> ShotRecord {
        ShotRecord {
            shot_index: 0,
            n_stored,
            source_attempted: transmitted,
            source_transmitted_intracavity: transmitted,
            source_transmitted_outside: transmitted / 2,
            n_scattered: 0,
            photons_to_collapse: None,
            collapsed: false,
            survived_decay: true,
            retrieved: false,
            detected_source: transmitted,
            detected_gate: 0,
        }
    }

    #[test]
    fn perfect_blocking_gains_full_strength() {
        let mut shots = vec![shot(0, 40); 30];
        shots.extend(vec![shot(1, 0); 10]);
        let g = gain(
            &shots,
            PhotonUnits::Intracavity,
            Classifier::GroundTruth,
            BootstrapConfig::default(),
        )
        .unwrap();
        assert_eq!(g.gain.value, 40.0);
        assert_eq!(g.source_strength.value, 40.0);
        let out = gain(
            &shots,
            PhotonUnits::Outside,
            Classifier::GroundTruth,
            BootstrapConfig::default(),
        )
        .unwrap();
        assert_eq!(out.gain.value, 20.0);
    }

    #[test]
    fn missing_component_is_error() {
        let shots = vec![shot(0, 4); 10];
        assert!(matches!(
            gain(
                &shots,
                PhotonUnits::Intracavity,
                Classifier::GroundTruth,
                BootstrapConfig::default()
            ),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn threshold_labels_match_truth_when_separated() {
        let mut shots: Vec<_> = (0..300u64).map(|i| shot(0, 30 + i % 7)).collect();
        shots.extend((0..100u64).map(|i| shot(1, i % 3)));
        let boot = BootstrapConfig::default();
        let truth = gain(&shots, PhotonUnits::Intracavity, Classifier::GroundTruth, boot).unwrap();
        let thr = gain(&shots, PhotonUnits::Intracavity, Classifier::Threshold(10), boot).unwrap();
        assert_eq!(truth.gain.value, thr.gain.value);
    }
}
