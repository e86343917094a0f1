//! Fluid limit: `sup_{t≤T} ‖Y^N(t) − ψ_t x‖` across replicas and `N`.

use std::path::Path;

use qnpop_core::fluid::{self, Direction};
use qnpop_core::model::ModelSpec;
use qnpop_core::ode::OdeOptions;
use qnpop_core::process::{self, SsaOptions};
use qnpop_core::{math, stats};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{monotone_verdict, start_point, stream, uniform_on_omega, Outcome, Spread};
use crate::config::ExperimentConfig;
use crate::io;
use crate::report::Verdict;
use crate::HarnessError;

#[derive(Serialize)]
struct Row {
    #[serde(rename = "N")]
    n: u64,
    replica: usize,
    sup_err: f64,
    absorbed: bool,
}

/// Snapshot times `min(k·dt, T)`, matching the simulator's grid.
pub(crate) fn grid(horizon: f64, dt: f64) -> Vec<f64> {
    let mut t = vec![0.0];
    let mut k = 1u64;
    while *t.last().unwrap() < horizon {
        t.push((k as f64 * dt).min(horizon));
        k += 1;
    }
    t
}

/// `ψ_t x0` on `times`, integrated segment by segment.
pub(crate) fn reference(model: &ModelSpec, x0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut out = vec![x0.to_vec()];
    for w in times.windows(2) {
        let prev = out.last().unwrap();
        let next = fluid::flow(model, prev, w[1] - w[0], false, Direction::Forward, OdeOptions::default())?.endpoint;
        out.push(next);
    }
    Ok(out)
}

pub(crate) fn run(config: &ExperimentConfig, model: &ModelSpec, seed: u64, csv: &Path) -> Result<Outcome, HarnessError> {
    let x0 = start_point(config, model, uniform_on_omega(model).iter().map(|v| 0.5 * v).collect())?;
    let horizon = config.horizon;
    let dt = config.snapshot_dt.unwrap_or(horizon / 500.0);
    let times = grid(horizon, dt);
    let psi = reference(model, &x0, &times)?;

    let cells: Vec<(usize, usize)> =
        (0..config.n_list.len()).flat_map(|c| (0..config.replicas).map(move |r| (c, r))).collect();
    let results = cells
        .par_iter()
        .map(|&(c, r)| {
            let n = config.n_list[c];
            let mut g = stream(seed, c, r);
            let path = process::simulate_path_with(model, &x0, n, horizon, &mut g, Some(dt), SsaOptions::default())?;
            let last = &path.snapshots.last().expect("initial snapshot").1;
            let sup = psi
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let y = path.snapshots.get(k).map_or(last, |s| &s.1);
                    math::norm(&y.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>())
                })
                .fold(0.0f64, f64::max);
            let sup = if path.escaped { f64::INFINITY } else { sup };
            Ok((Row { n, replica: r, sup_err: sup, absorbed: path.absorbed }, path.event_count))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let events = results.iter().map(|(_, e)| e).sum();
    let rows: Vec<Row> = results.into_iter().map(|(row, _)| row).collect();
    io::write_csv(csv, &rows)?;

    let per_n: Vec<Spread> = config
        .n_list
        .iter()
        .map(|&n| Spread::of(&rows.iter().filter(|r| r.n == n).map(|r| r.sup_err).collect::<Vec<_>>()))
        .collect();
    let absorbed: Vec<usize> =
        config.n_list.iter().map(|&n| rows.iter().filter(|r| r.n == n && r.absorbed).count()).collect();

    let mut verdicts = Vec::new();
    let mut fit_json = serde_json::Value::Null;
    if config.n_list.len() >= 2 {
        let pts: Vec<(f64, f64)> =
            config.n_list.iter().zip(&per_n).map(|(&n, s)| ((n as f64).ln(), s.median.ln())).collect();
        let fit = stats::linear_fit(&pts);
        let [lo, hi] = config.tolerances.slope_band;
        let ci = [fit.slope - 1.96 * fit.slope_se, fit.slope + 1.96 * fit.slope_se];
        verdicts.push(Verdict::new(
            "slope_in_band",
            fit.slope >= lo && fit.slope <= hi,
            fit.slope,
            format!("in [{lo}, {hi}]"),
            format!("log-log slope of median sup-error, 95% CI [{:.4}, {:.4}]", ci[0], ci[1]),
        ));
        fit_json = json!({ "slope": fit.slope, "slope_se": fit.slope_se, "ci95": ci, "r2": fit.r2 });
    }
    verdicts.push(monotone_verdict("median_sup_err_decreasing", &config.n_list, &per_n.iter().collect::<Vec<_>>()));

    let summary = json!({
        "x0": x0,
        "snapshot_dt": dt,
        "per_n": config.n_list.iter().zip(&per_n).zip(&absorbed).map(|((n, s), a)| json!({
            "N": n, "sup_err": s, "absorbed": a,
        })).collect::<Vec<_>>(),
        "fit": fit_json,
    });
    Ok(Outcome { summary, verdicts, events })
}
