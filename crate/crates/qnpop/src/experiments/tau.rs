//! Collapse onto `Ω`: `sup_t |τ(Z^N(t))|` on the accelerated clock
//! `Z^N(t) = X^N(Nt/2)/N`, against the threshold `N^{-δ}`.

use std::path::Path;

use qnpop_core::manifold::{self, ManifoldOptions};
use qnpop_core::model::ModelSpec;
use qnpop_core::process::{PopulationState, Ssa, SsaOptions, Stop};
use qnpop_core::{math, Error};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::lln::grid;
use super::{monotone_verdict, start_point, stream, uniform_on_omega, Outcome, Spread};
use crate::config::ExperimentConfig;
use crate::io;
use crate::report::Verdict;
use crate::HarnessError;

/// Points with `|R| ≤` this count as on `Ω` and get no warm-up.
pub(crate) const ON_OMEGA_TOL: f64 = 1e-8;

#[derive(Serialize)]
struct Row {
    #[serde(rename = "N")]
    n: u64,
    replica: usize,
    sup_tau: f64,
    sup_dist: f64,
    exceeded: bool,
    absorbed: bool,
    arrived: bool,
}

/// Process time spent before statistics are taken: `c·ln N` for off-`Ω`
/// starts, zero otherwise.
pub(crate) fn warmup_time(config: &ExperimentConfig, model: &ModelSpec, x: &[f64], n: u64) -> Result<f64, HarnessError> {
    let off = math::abs(model.r(x)?) > ON_OMEGA_TOL;
    Ok(if off { config.warmup * (n as f64).ln() } else { 0.0 })
}

pub(crate) fn run(config: &ExperimentConfig, model: &ModelSpec, seed: u64, csv: &Path) -> Result<Outcome, HarnessError> {
    let x0 = start_point(config, model, uniform_on_omega(model))?;
    let horizon = config.horizon;
    let times = grid(horizon, config.snapshot_dt.unwrap_or(horizon / 200.0));
    let opts = ManifoldOptions::default();

    let cells: Vec<(usize, usize)> =
        (0..config.n_list.len()).flat_map(|c| (0..config.replicas).map(move |r| (c, r))).collect();
    let results = cells
        .par_iter()
        .map(|&(c, r)| {
            let n = config.n_list[c];
            let nf = n as f64;
            let threshold = nf.powf(-config.delta);
            let mut g = stream(seed, c, r);
            let (state, _) = PopulationState::from_density(&x0, n);
            let mut counts = state.counts;
            let mut ssa = Ssa::new(model, n, SsaOptions::default());
            let mut t = 0.0;
            let t0 = warmup_time(config, model, &x0, n)?;
            let mut stop = if t0 > 0.0 { ssa.advance(&mut counts, &mut t, t0, &mut g, None)? } else { Stop::Horizon };
            let (mut sup_tau, mut sup_dist) = (0.0f64, 0.0f64);
            let mut arrived = false;
            for &s in &times {
                if stop != Stop::Horizon {
                    break;
                }
                if s > 0.0 {
                    stop = ssa.advance(&mut counts, &mut t, t0 + 0.5 * nf * s, &mut g, None)?;
                }
                if stop == Stop::Escaped {
                    let density = counts.iter().map(|&k| k as f64 / nf).collect();
                    return Err(Error::DomainEscape { density }.into());
                }
                if stop == Stop::Absorbed {
                    break;
                }
                let z: Vec<f64> = counts.iter().map(|&k| k as f64 / nf).collect();
                let p = manifold::project_and_time(model, &z, &opts)?;
                arrived = arrived || config.arrival.map_or(true, |a| p.tau.abs() <= a);
                if !arrived {
                    continue;
                }
                sup_tau = sup_tau.max(p.tau.abs());
                sup_dist = sup_dist.max(math::norm(&z.iter().zip(&p.pi).map(|(a, b)| a - b).collect::<Vec<_>>()));
            }
            let row = Row {
                n,
                replica: r,
                sup_tau,
                sup_dist,
                exceeded: sup_tau > threshold,
                absorbed: stop == Stop::Absorbed,
                arrived,
            };
            Ok((row, ssa.events))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let events = results.iter().map(|(_, e)| e).sum();
    let rows: Vec<Row> = results.into_iter().map(|(row, _)| row).collect();
    io::write_csv(csv, &rows)?;

    let mut verdicts = Vec::new();
    let mut per_n = Vec::new();
    let mut ratio_spreads = Vec::new();
    let mut dist_spreads = Vec::new();
    for &n in &config.n_list {
        let mine: Vec<&Row> = rows.iter().filter(|r| r.n == n).collect();
        let threshold = (n as f64).powf(-config.delta);
        let frac = mine.iter().filter(|r| r.exceeded).count() as f64 / mine.len() as f64;
        let tau = Spread::of(&mine.iter().map(|r| r.sup_tau).collect::<Vec<_>>());
        let ratio = Spread::of(&mine.iter().map(|r| r.sup_tau / threshold).collect::<Vec<_>>());
        let dist = Spread::of(&mine.iter().map(|r| r.sup_dist).collect::<Vec<_>>());
        verdicts.push(Verdict::new(
            &format!("exceedance_N{n}"),
            frac <= config.tolerances.exceedance_max,
            frac,
            format!("<= {}", config.tolerances.exceedance_max),
            format!("fraction of replicas with sup |tau| > N^-{} = {threshold:.5}", config.delta),
        ));
        per_n.push(json!({
            "N": n,
            "threshold": threshold,
            "exceedance_fraction": frac,
            "sup_tau": tau,
            "sup_tau_over_threshold": ratio,
            "sup_dist_to_pi": dist,
            "absorbed": mine.iter().filter(|r| r.absorbed).count(),
            "never_arrived": mine.iter().filter(|r| !r.arrived).count(),
        }));
        ratio_spreads.push(ratio);
        dist_spreads.push(dist);
    }
    if config.n_list.len() >= 2 {
        let medians: Vec<f64> = ratio_spreads.iter().map(|s| s.median).collect();
        let strict = medians.windows(2).all(|w| w[1] < w[0]);
        verdicts.push(Verdict::new(
            "median_exceedance_decreasing",
            strict,
            *medians.last().unwrap(),
            "strictly decreasing in N",
            format!("median of sup |tau| / N^-delta: {medians:?} over N = {:?}", config.n_list),
        ));
    }
    verdicts.push(monotone_verdict("median_dist_to_pi_decreasing", &config.n_list, &dist_spreads.iter().collect::<Vec<_>>()));

    let summary = json!({
        "x0": x0,
        "delta": config.delta,
        "clock": "Z^N(t) = X^N(N t / 2) / N; horizon and grid in t",
        "arrival": config.arrival,
        "note": "delta is the exponent of the threshold N^-delta; arrival is the separate neighbourhood size |tau| <= arrival that starts the clock of each replica",
        "per_n": per_n,
    });
    Ok(Outcome { summary, verdicts, events })
}
