//! Experiment reports.

use serde::Serialize;

use crate::config::ExperimentConfig;

/// Crate version plus `git describe` of the build tree.
pub fn version() -> String {
    format!("qnpop {}+{}", env!("CARGO_PKG_VERSION"), env!("QNPOP_GIT_DESCRIBE"))
}

/// Printed in every report.
pub const CONSTANTS_NOTE: &str = "The constants in the finite-N bounds depend on rate bounds that \
cannot be estimated for opaque models. Verdicts therefore test decay, exponent bands and z-scores, \
not the bounds themselves.";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    /// Human-readable threshold, e.g. `in [-0.65, -0.35]`.
    pub threshold: String,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, observed: f64, threshold: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, observed, threshold: threshold.into(), detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Telemetry {
    pub wall_seconds: f64,
    pub events: u64,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub model: String,
    pub note: &'static str,
    /// Experiment-specific summary tables.
    pub summary: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    pub telemetry: Telemetry,
    /// Name of the per-replica CSV written next to the report.
    pub table: String,
}

impl ExperimentReport {
    pub fn failed(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.pass)
    }
}

/// Non-increasing check over `values` with one inversion tolerated when it
/// is within the larger of the two standard errors. Returns the verdict and
/// the indices of tolerated inversions.
pub fn monotone_probe(values: &[f64], ses: &[f64]) -> (bool, Vec<usize>) {
    let mut noise = Vec::new();
    let mut hard = false;
    for i in 1..values.len() {
        if values[i] > values[i - 1] {
            if values[i] - values[i - 1] <= ses[i].max(ses[i - 1]) {
                noise.push(i);
            } else {
                hard = true;
            }
        }
    }
    (!hard && noise.len() <= 1, noise)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_probe_allows_one_small_inversion() {
        assert_eq!(monotone_probe(&[3.0, 2.0, 1.0], &[0.1; 3]), (true, vec![]));
        assert_eq!(monotone_probe(&[3.0, 3.05, 1.0], &[0.1; 3]), (true, vec![1]));
        assert!(!monotone_probe(&[3.0, 3.05, 3.1], &[0.1; 3]).0);
        assert!(!monotone_probe(&[1.0, 2.0], &[0.1; 2]).0);
    }
}
