//! Batch experiments. Every experiment fans out over `(cell, replica)` pairs
//! on a rayon pool and reduces in replica order, so outputs depend only on
//! the config and the seed.

mod generator;
mod lln;
mod moments;
mod tau;
mod wf;

use std::time::Instant;

use qnpop_core::manifold;
use qnpop_core::model::ModelSpec;
use qnpop_core::rng::{self, Rng};
use qnpop_core::stats;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::io;
use crate::report::{self, ExperimentReport, Telemetry, Verdict};
use crate::HarnessError;

/// What an experiment hands back to [`run`].
pub(crate) struct Outcome {
    pub summary: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub events: u64,
}

/// Runs `config`, writes `<experiment>.csv` and `report.json` into its
/// output directory, and returns the report.
pub fn run(mut config: ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let seed = config.resolve_seed(None)?;
    let entry = config.model.build()?;
    let model = &entry.spec;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build()?;
    let threads = pool.current_num_threads();
    let table = format!("{}.csv", config.experiment.name());
    let csv_path = config.output_dir.join(&table);
    let started = Instant::now();
    let outcome = pool.install(|| match config.experiment {
        ExperimentKind::Lln => lln::run(&config, model, seed, &csv_path),
        ExperimentKind::TauDecay => tau::run(&config, model, seed, &csv_path),
        ExperimentKind::GeneratorCheck => generator::run(&config, model, seed, &csv_path),
        ExperimentKind::WfReduction => wf::run(&config, model, seed, &csv_path),
        ExperimentKind::MomentCompare => moments::run(&config, model, seed, &csv_path),
    })?;
    let pass = outcome.verdicts.iter().all(|v| v.pass);
    let report = ExperimentReport {
        version: report::version(),
        model: entry.label(),
        config,
        note: report::CONSTANTS_NOTE,
        summary: outcome.summary,
        verdicts: outcome.verdicts,
        pass,
        telemetry: Telemetry { wall_seconds: started.elapsed().as_secs_f64(), events: outcome.events, threads },
        table,
    };
    io::write_report(&report.config.output_dir, &report)?;
    Ok(report)
}

fn with_kind(mut config: ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentReport, HarnessError> {
    config.experiment = kind;
    run(config)
}

pub fn run_lln(config: ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    with_kind(config, ExperimentKind::Lln)
}

pub fn run_tau_decay(config: ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    with_kind(config, ExperimentKind::TauDecay)
}

pub fn run_generator_check(config: ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    with_kind(config, ExperimentKind::GeneratorCheck)
}

pub fn run_wf_reduction(config: ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    with_kind(config, ExperimentKind::WfReduction)
}

pub fn run_moment_compare(config: ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    with_kind(config, ExperimentKind::MomentCompare)
}

/// Stream for `replica` in experiment cell `cell`.
pub(crate) fn stream(seed: u64, cell: usize, replica: usize) -> Rng {
    rng::replica_rng(seed, rng::stream_id(cell as u32, replica as u32))
}

/// `ρ·n_e(ρ)` for the uniform `ρ`, or `0.25·1` without a slow manifold.
pub(crate) fn uniform_on_omega(model: &ModelSpec) -> Vec<f64> {
    let rho = vec![1.0 / model.k as f64; model.k];
    match manifold::effective_density(model, &rho) {
        Ok(n) => rho.iter().map(|v| v * n).collect(),
        Err(_) => vec![0.25; model.k],
    }
}

/// Frequencies mapped onto `Ω` along their rays.
pub fn on_omega(model: &ModelSpec, rho: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if rho.len() != model.k || rho.iter().any(|v| *v < 0.0) {
        return Err(HarnessError::Config(format!("frequency {rho:?} must have {} non-negative entries", model.k)));
    }
    let r = manifold::radial_projection(rho)?;
    let n = manifold::effective_density(model, &r.rho)?;
    Ok(r.rho.iter().map(|v| v * n).collect())
}

pub(crate) fn start_point(config: &ExperimentConfig, model: &ModelSpec, default: Vec<f64>) -> Result<Vec<f64>, HarnessError> {
    match &config.x0 {
        Some(x) if x.len() != model.k => {
            Err(HarnessError::Config(format!("x0: expected {} entries, got {}", model.k, x.len())))
        }
        Some(x) => {
            model.check_domain(x).map_err(|e| HarnessError::Config(format!("x0: {e}")))?;
            Ok(x.clone())
        }
        None => Ok(default),
    }
}

/// Median, quartiles, mean and the median's standard error.
#[derive(Debug, Clone, Serialize)]
pub(crate) struct Spread {
    pub median: f64,
    pub median_se: f64,
    pub q25: f64,
    pub q75: f64,
    pub mean: f64,
}

impl Spread {
    pub fn of(v: &[f64]) -> Self {
        Self {
            median: stats::median(v),
            median_se: stats::median_se(v),
            q25: stats::quantile(v, 0.25),
            q75: stats::quantile(v, 0.75),
            mean: stats::mean(v),
        }
    }
}

/// Verdict for a per-N statistic that should not increase with N.
pub(crate) fn monotone_verdict(name: &str, ns: &[u64], spreads: &[&Spread]) -> Verdict {
    let values: Vec<f64> = spreads.iter().map(|s| s.median).collect();
    let ses: Vec<f64> = spreads.iter().map(|s| s.median_se).collect();
    let (pass, noise) = report::monotone_probe(&values, &ses);
    let detail = if noise.is_empty() {
        format!("medians {values:?} over N = {ns:?}")
    } else {
        let at: Vec<u64> = noise.iter().map(|&i| ns[i]).collect();
        format!("medians {values:?} over N = {ns:?}; inversion within 1 SE at N = {at:?} treated as noise")
    };
    Verdict::new(name, pass, values.last().copied().unwrap_or(f64::NAN), "non-increasing in N", detail)
}
