//! Wright–Fisher reduction: the frequency diffusion coefficient of a
//! two-type neutral model against `c·p(1−p)`.

use std::path::Path;

use qnpop_core::diffusion::Observable;
use qnpop_core::model::ModelSpec;
use qnpop_core::stats;
use serde::Serialize;
use serde_json::json;

use super::generator::{oracle, predicted};
use super::{on_omega, Outcome};
use crate::config::ExperimentConfig;
use crate::io;
use crate::report::Verdict;
use crate::HarnessError;

#[derive(Serialize)]
struct Row {
    model: &'static str,
    p: f64,
    predicted: f64,
    estimate: f64,
    se: f64,
    drift: f64,
    drift_se: f64,
}

struct Fit {
    c: f64,
    r2: f64,
    c_predicted: f64,
}

fn p_grid(config: &ExperimentConfig) -> Result<Vec<f64>, HarnessError> {
    match &config.frequencies {
        None => Ok((1..10).map(|i| f64::from(i) / 10.0).collect()),
        Some(f) => f
            .iter()
            .map(|rho| match rho.as_slice() {
                [p] | [p, _] if *p > 0.0 && *p < 1.0 => Ok(*p),
                _ => Err(HarnessError::Config(format!("frequencies: {rho:?} is not a p in (0, 1)"))),
            })
            .collect(),
    }
}

fn measure(
    config: &ExperimentConfig,
    model: &ModelSpec,
    label: &'static str,
    slot: usize,
    seed: u64,
    rows: &mut Vec<Row>,
) -> Result<(Fit, u64), HarnessError> {
    if model.k != 2 {
        return Err(HarnessError::Config(format!("wf_reduction needs a two-type model, got K = {}", model.k)));
    }
    let n = *config.n_list.last().expect("validated non-empty");
    let ps = p_grid(config)?;
    let mut events = 0;
    let mut fit_pts = Vec::new();
    let mut pred_pts = Vec::new();
    for (i, &p) in ps.iter().enumerate() {
        let x = on_omega(model, &[p, 1.0 - p])?;
        let (_, est) = oracle(config, model, &x, n, Observable::Frequency, seed, slot * ps.len() + i)?;
        events += est.events;
        let (_, a, _) = predicted(model, &est.pi0, Observable::Frequency)?;
        let r = &est.richardson;
        let q = p * (1.0 - p);
        fit_pts.push((q, r.diffusion[0]));
        pred_pts.push((q, a[0]));
        rows.push(Row {
            model: label,
            p,
            predicted: a[0],
            estimate: r.diffusion[0],
            se: r.diffusion_se[0],
            drift: r.drift[0],
            drift_se: r.drift_se[0],
        });
    }
    let (c, r2) = stats::proportional_fit(&fit_pts);
    let (c_predicted, _) = stats::proportional_fit(&pred_pts);
    Ok((Fit { c, r2, c_predicted }, events))
}

pub(crate) fn run(config: &ExperimentConfig, model: &ModelSpec, seed: u64, csv: &Path) -> Result<Outcome, HarnessError> {
    let tol = &config.tolerances;
    let mut rows = Vec::new();
    let (fit, mut events) = measure(config, model, "model", 0, seed, &mut rows)?;
    let mut verdicts = vec![Verdict::new(
        "r2_model",
        fit.r2 >= tol.r2_min,
        fit.r2,
        format!(">= {}", tol.r2_min),
        format!("fitted c = {:.5}, generator c = {:.5}", fit.c, fit.c_predicted),
    )];
    if let Some(mid) = rows.iter().find(|r| (r.p - 0.5).abs() < 1e-12) {
        let z = stats::z_score(mid.drift, 0.0, mid.drift_se);
        verdicts.push(Verdict::new(
            "symmetric_drift",
            z.abs() <= tol.z_max,
            z,
            format!("|z| <= {}", tol.z_max),
            format!("frequency drift at p = 0.5 is {:.3e} (se {:.1e})", mid.drift, mid.drift_se),
        ));
    }
    let mut variant_json = serde_json::Value::Null;
    if let Some(v) = &config.variant {
        let entry = v.build()?;
        let (vfit, ev) = measure(config, &entry.spec, "variant", 1, seed, &mut rows)?;
        events += ev;
        verdicts.push(Verdict::new(
            "r2_variant",
            vfit.r2 >= tol.r2_min,
            vfit.r2,
            format!(">= {}", tol.r2_min),
            format!("fitted c = {:.5}, generator c = {:.5}", vfit.c, vfit.c_predicted),
        ));
        let measured = vfit.c / fit.c;
        let expected = vfit.c_predicted / fit.c_predicted;
        let rel = (measured / expected - 1.0).abs();
        verdicts.push(Verdict::new(
            "variant_ratio",
            rel <= tol.ratio_tol,
            rel,
            format!("|measured/predicted - 1| <= {}", tol.ratio_tol),
            format!("c ratio measured {measured:.4}, predicted {expected:.4}"),
        ));
        variant_json = json!({
            "model": entry.label(),
            "c": vfit.c, "r2": vfit.r2, "c_predicted": vfit.c_predicted,
            "ratio_measured": measured, "ratio_predicted": expected,
        });
    }
    io::write_csv(csv, &rows)?;
    let summary = json!({
        "N": config.n_list.last(),
        "h": config.h,
        "fit": { "c": fit.c, "r2": fit.r2, "c_predicted": fit.c_predicted },
        "variant": variant_json,
    });
    Ok(Outcome { summary, verdicts, events })
}
