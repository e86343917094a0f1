//! Short-time jump moments of the exact chain against the generator
//! coefficients on `Ω`.

use std::path::Path;

use qnpop_core::diffusion::{self, BurstSetup, GeneratorCoefficients, Observable, OracleResult};
use qnpop_core::manifold;
use qnpop_core::model::ModelSpec;
use qnpop_core::process::{PopulationState, Ssa, SsaOptions, Stop};
use qnpop_core::Error;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::tau::warmup_time;
use super::{on_omega, stream, Outcome};
use crate::config::ExperimentConfig;
use crate::io;
use crate::report::Verdict;
use crate::HarnessError;

#[derive(Serialize)]
struct Row {
    #[serde(rename = "N")]
    n: u64,
    point: usize,
    kind: &'static str,
    i: usize,
    j: Option<usize>,
    predicted: f64,
    estimate: f64,
    se: f64,
    z: f64,
}

/// Default query frequencies: the uniform vector and two skewed ones.
pub(crate) fn default_frequencies(k: usize) -> Vec<Vec<f64>> {
    if k == 2 {
        return vec![vec![0.2, 0.8], vec![0.5, 0.5], vec![0.8, 0.2]];
    }
    let skew = |lead: usize| (0..k).map(|i| if i == lead { 0.5 } else { 0.5 / (k - 1) as f64 }).collect();
    vec![vec![1.0 / k as f64; k], skew(0), skew(k - 1)]
}

/// Coefficients in the coordinates the oracle measures.
pub(crate) fn predicted(model: &ModelSpec, pi: &[f64], obs: Observable) -> Result<(Vec<f64>, Vec<f64>, GeneratorCoefficients), HarnessError> {
    let g = diffusion::generator_coefficients(model, pi)?;
    Ok(match obs {
        Observable::Projection => (g.drift.clone(), g.diffusion.clone(), g),
        Observable::Frequency => {
            let f = diffusion::pushforward_frequency(model, &g)?;
            (f.drift, f.diffusion, g)
        }
    })
}

/// Runs `replicas` bursts from `x` in parallel. Off-`Ω` starts first run the
/// chain for the warm-up time and burst from wherever each replica landed.
pub(crate) fn oracle(
    config: &ExperimentConfig,
    model: &ModelSpec,
    x: &[f64],
    n: u64,
    obs: Observable,
    seed: u64,
    cell: usize,
) -> Result<(BurstSetup, OracleResult), HarnessError> {
    let warm = warmup_time(config, model, x, n)?;
    let nominal = if warm > 0.0 {
        let pi = manifold::project_and_time(model, x, &diffusion::oracle_manifold_options())?.pi;
        diffusion::burst_setup(model, &pi, n, config.h, obs)?
    } else {
        diffusion::burst_setup(model, x, n, config.h, obs)?
    };
    let samples = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let mut g = stream(seed, cell, r);
            if warm == 0.0 {
                return Ok(diffusion::burst(model, &nominal, &mut g)?);
            }
            let (state, _) = PopulationState::from_density(x, n);
            let mut counts = state.counts;
            let mut ssa = Ssa::new(model, n, SsaOptions::default());
            let mut t = 0.0;
            let stop = ssa.advance(&mut counts, &mut t, warm, &mut g, None)?;
            let z: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            if stop != Stop::Horizon {
                return Err(HarnessError::Core(Error::DomainEscape { density: z }));
            }
            let setup = diffusion::burst_setup(model, &z, n, config.h, obs)?;
            let mut s = diffusion::burst(model, &setup, &mut g)?;
            s.events += ssa.events;
            Ok(s)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let result = diffusion::reduce_bursts(&nominal, &samples);
    Ok((nominal, result))
}

pub(crate) fn run(config: &ExperimentConfig, model: &ModelSpec, seed: u64, csv: &Path) -> Result<Outcome, HarnessError> {
    let k = model.k;
    let points: Vec<Vec<f64>> = match (&config.points, &config.frequencies) {
        (Some(p), _) => {
            if let Some(bad) = p.iter().find(|x| x.len() != k) {
                return Err(HarnessError::Config(format!("points: {bad:?} must have {k} entries")));
            }
            p.clone()
        }
        (None, Some(f)) => f.iter().map(|rho| on_omega(model, rho)).collect::<Result<_, _>>()?,
        (None, None) => default_frequencies(k).iter().map(|rho| on_omega(model, rho)).collect::<Result<_, _>>()?,
    };
    let obs = config.observable;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut verdicts = Vec::new();
    let mut events = 0;
    for (ni, &n) in config.n_list.iter().enumerate() {
        for (pi_idx, x) in points.iter().enumerate() {
            let cell = ni * points.len() + pi_idx;
            let (_, est) = oracle(config, model, x, n, obs, seed, cell)?;
            events += est.events;
            let (b, a, g) = predicted(model, &est.pi0, obs)?;
            let (zb, za) = diffusion::z_scores(&est.richardson, &b, &a);
            let r = &est.richardson;
            for i in 0..k {
                rows.push(Row { n, point: pi_idx, kind: "drift", i, j: None, predicted: b[i], estimate: r.drift[i], se: r.drift_se[i], z: zb[i] });
            }
            let mut idx = 0;
            for i in 0..k {
                for j in i..k {
                    let at = i * k + j;
                    rows.push(Row {
                        n,
                        point: pi_idx,
                        kind: "diffusion",
                        i,
                        j: Some(j),
                        predicted: a[at],
                        estimate: r.diffusion[at],
                        se: r.diffusion_se[at],
                        z: za[idx],
                    });
                    idx += 1;
                }
            }
            let worst = zb.iter().chain(&za).fold(0.0f64, |m, z| m.max(z.abs()));
            verdicts.push(Verdict::new(
                &format!("z_N{n}_point{pi_idx}"),
                worst <= config.tolerances.z_max,
                worst,
                format!("max |z| <= {}", config.tolerances.z_max),
                format!("{} drift and {} diffusion entries at pi = {:?}", zb.len(), za.len(), est.pi0),
            ));
            cells.push(json!({
                "N": n,
                "point": pi_idx,
                "start": x,
                "pi0": est.pi0,
                "predicted": { "drift": b, "diffusion": a },
                "generator": g,
                "oracle": est,
                "z_drift": zb,
                "z_diffusion": za,
            }));
        }
    }
    io::write_csv(csv, &rows)?;
    let summary = json!({
        "observable": obs,
        "h": config.h,
        "estimator": "two-step Richardson extrapolation in h of the burst moments",
        "cells": cells,
    });
    Ok(Outcome { summary, verdicts, events })
}
