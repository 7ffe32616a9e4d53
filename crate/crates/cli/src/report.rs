//! Comparison of a summary against a table of reference bands.

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;
use sptsim_core::stats::Estimate;

use crate::error::{CliError, Result};
use crate::experiments::Summary;

/// Built-in reference bands for the headline observables.
pub const BUILTIN_REFERENCE: &str = include_str!("../reference/acceptance.csv");

/// Admissible band for one observable. A missing bound is unbounded.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub observable: String,
    pub low: Option<f64>,
    pub high: Option<f64>,
    #[serde(default)]
    pub note: String,
}

impl ReferenceRow {
    /// `target +- tolerance`.
    pub fn band(observable: &str, target: f64, tolerance: f64) -> Self {
        Self {
            observable: observable.to_string(),
            low: Some(target - tolerance),
            high: Some(target + tolerance),
            note: String::new(),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && self.low.is_none_or(|l| v >= l) && self.high.is_none_or(|h| v <= h)
    }
}

impl fmt::Display for ReferenceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.low, self.high) {
            (Some(l), Some(h)) => write!(f, "[{l}, {h}]"),
            (Some(l), None) => write!(f, ">= {l}"),
            (None, Some(h)) => write!(f, "<= {h}"),
            (None, None) => write!(f, "any value"),
        }
    }
}

pub fn parse_reference(text: &str) -> Result<Vec<ReferenceRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: std::result::Result<Vec<ReferenceRow>, _> = reader.deserialize().collect();
    let rows = rows.map_err(|e| CliError::Schema(format!("reference table: {e}")))?;
    if rows.is_empty() {
        return Err(CliError::Schema("reference table has no rows".into()));
    }
    Ok(rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictEstimate {
    value: f64,
    err_low: f64,
    err_high: f64,
}

/// Parses a summary file: a flat JSON object of `{value, err_low, err_high}`.
pub fn parse_summary(text: &str) -> Result<Summary> {
    let raw: BTreeMap<String, StrictEstimate> =
        serde_json::from_str(text).map_err(|e| CliError::Schema(format!("summary: {e}")))?;
    Ok(raw
        .into_iter()
        .map(|(k, e)| {
            (
                k,
                Estimate {
                    value: e.value,
                    err_low: e.err_low,
                    err_high: e.err_high,
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The summary does not contain the observable.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reference: ReferenceRow,
    pub value: Option<Estimate>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub comparisons: Vec<Comparison>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.comparisons.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Comparison> {
        self.comparisons.iter().filter(|c| c.verdict == Verdict::Fail)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.comparisons {
            let name = &c.reference.observable;
            match (c.verdict, c.value) {
                (Verdict::Skipped, _) | (_, None) => writeln!(f, "SKIP {name}: not in summary")?,
                (verdict, Some(v)) => {
                    let tag = if verdict == Verdict::Pass { "PASS" } else { "FAIL" };
                    writeln!(
                        f,
                        "{tag} {name} = {} (-{} +{}) against {}",
                        v.value, v.err_low, v.err_high, c.reference
                    )?;
                }
            }
        }
        let failed = self.failures().count();
        let compared = self
            .comparisons
            .iter()
            .filter(|c| c.verdict != Verdict::Skipped)
            .count();
        writeln!(f, "{} of {compared} compared observables passed", compared - failed)
    }
}

/// Checks every reference row against the summary. Rows whose observable
/// is absent are skipped; a summary sharing no observable with the table is
/// a schema mismatch.
pub fn compare_report(summary: &Summary, reference: &[ReferenceRow]) -> Result<Report> {
    let comparisons: Vec<Comparison> = reference
        .iter()
        .map(|row| {
            let value = summary.get(&row.observable).copied();
            let verdict = match value {
                None => Verdict::Skipped,
                Some(v) if row.contains(v.value) => Verdict::Pass,
                Some(_) => Verdict::Fail,
            };
            Comparison {
                reference: row.clone(),
                value,
                verdict,
            }
        })
        .collect();
    if comparisons.iter().all(|c| c.verdict == Verdict::Skipped) {
        return Err(CliError::Schema(
            "summary shares no observable with the reference table".into(),
        ));
    }
    Ok(Report { comparisons })
}
