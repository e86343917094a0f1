//! The limit vector field `F`, its flows and variational matrices, and
//! numerical probes of the structural conditions on `F`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::model::ModelSpec;
use crate::ode::{Dopri5, OdeOptions};

/// Tolerance on `F_i = 𝓕_i R`.
pub const FACTOR_TOL: f64 = 1e-10;

/// `F(x)` and, for quasi-neutral models, the slow field `𝓕(x)` and `R(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEval {
    pub f: Vec<f64>,
    pub slow: Option<Vec<f64>>,
    pub r: Option<f64>,
}

/// Evaluates `F` and cross-checks it against `𝓕·R` when the model is
/// quasi-neutral.
pub fn drift_f(model: &ModelSpec, x: &[f64]) -> Result<DriftEval> {
    model.check_domain(x)?;
    let mut f = vec![0.0; model.k];
    model.drift(x, &mut f);
    if !model.is_quasi_neutral() {
        return Ok(DriftEval { f, slow: None, r: None });
    }
    let mut slow = vec![0.0; model.k];
    model.slow_field(x, &mut slow)?;
    let r = model.r(x)?;
    check_factorisation(&f, &slow, r)?;
    Ok(DriftEval { f, slow: Some(slow), r: Some(r) })
}

fn check_factorisation(f: &[f64], slow: &[f64], r: f64) -> Result<()> {
    for (i, (&fi, &si)) in f.iter().zip(slow).enumerate() {
        let rhs = si * r;
        let tol = FACTOR_TOL * math::abs(fi).max(math::abs(rhs)) + 1e-14 * math::abs(si);
        if !(math::abs(fi - rhs) <= tol) {
            return Err(Error::QuasiNeutralMismatch { index: i, lhs: fi, rhs });
        }
    }
    Ok(())
}

/// Which field to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `ẋ = F(x)`, the flow `ψ_t`.
    Forward,
    /// `ẋ = −𝓕(x)`, the flow `φ_t`.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub endpoint: Vec<f64>,
    pub t: f64,
    /// Row-major `K×K` fundamental matrix of the variational equation.
    pub fundamental: Option<Vec<f64>>,
    pub steps: usize,
    pub est_error: f64,
}

/// Field value for `direction`.
pub(crate) fn field(model: &ModelSpec, dir: Direction, x: &[f64], out: &mut [f64]) -> Result<()> {
    match dir {
        Direction::Forward => {
            model.drift(x, out);
            Ok(())
        }
        Direction::Backward => {
            model.slow_field(x, out)?;
            for o in out.iter_mut() {
                *o = -*o;
            }
            Ok(())
        }
    }
}

/// Jacobian of the field for `direction`.
pub(crate) fn field_jacobian(model: &ModelSpec, dir: Direction, x: &[f64], out: &mut [f64]) -> Result<()> {
    match dir {
        Direction::Forward => {
            model.drift_jacobian(x, out);
            Ok(())
        }
        Direction::Backward => {
            model.slow_field_jacobian(x, out)?;
            for o in out.iter_mut() {
                *o = -*o;
            }
            Ok(())
        }
    }
}

/// Right-hand side for `[x, vec(M)]` with `Ṁ = J(x)·M`.
pub(crate) fn variational_rhs(
    model: &ModelSpec,
    dir: Direction,
    y: &[f64],
    out: &mut [f64],
    jac: &mut [f64],
) -> Result<()> {
    let k = model.k;
    let (x, m) = y.split_at(k);
    let (ox, om) = out.split_at_mut(k);
    field(model, dir, x, ox)?;
    if !m.is_empty() {
        field_jacobian(model, dir, x, jac)?;
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for l in 0..k {
                    s += jac[i * k + l] * m[l * k + j];
                }
                om[i * k + j] = s;
            }
        }
    }
    Ok(())
}

/// Integrates the chosen field for time `t ≥ 0` from `x0`.
pub fn flow(
    model: &ModelSpec,
    x0: &[f64],
    t: f64,
    want_fundamental: bool,
    direction: Direction,
    opts: OdeOptions,
) -> Result<FlowResult> {
    model.check_domain(x0)?;
    if direction == Direction::Backward {
        model.qn()?;
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("flow time {t}")));
    }
    let k = model.k;
    let mut y = x0.to_vec();
    if want_fundamental {
        y.extend(linalg::identity(k));
    }
    let mut jac = vec![0.0; k * k];
    let mut ode = Dopri5::new(y.len(), opts);
    let mut rhs = |_t: f64, y: &[f64], o: &mut [f64]| variational_rhs(model, direction, y, o, &mut jac);
    ode.integrate(&mut rhs, 0.0, t, &mut y)?;
    let fundamental = want_fundamental.then(|| y[k..].to_vec());
    y.truncate(k);
    model.check_domain(&y)?;
    Ok(FlowResult { endpoint: y, t, fundamental, steps: ode.steps, est_error: ode.err_est })
}

/// `DF(x)`. On `Ω` the rank-one form `𝓕 ⊗ DR` is verified to `1e-6`.
pub fn jacobian_df(model: &ModelSpec, x: &[f64]) -> Result<Vec<f64>> {
    let k = model.k;
    let mut j = vec![0.0; k * k];
    model.drift_jacobian(x, &mut j);
    if model.is_quasi_neutral() && math::abs(model.r(x)?) <= 1e-12 {
        let mut s = vec![0.0; k];
        let mut g = vec![0.0; k];
        model.slow_field(x, &mut s)?;
        model.grad_r(x, &mut g)?;
        let scale = linalg::max_norm(&j).max(1e-300);
        for a in 0..k {
            for b in 0..k {
                let d = math::abs(j[a * k + b] - s[a] * g[b]);
                if d > 1e-6 * scale.max(1.0) {
                    return Err(Error::QuasiNeutralMismatch { index: a * k + b, lhs: j[a * k + b], rhs: s[a] * g[b] });
                }
            }
        }
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    pub verdict: Verdict,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub conditions: Vec<ConditionResult>,
}

impl StructureReport {
    pub fn get(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn off_diag_tol(jac: &[f64]) -> f64 {
    1e-8 * linalg::max_norm(jac).max(1.0)
}

fn strongly_connected(adj: &[bool], k: usize) -> bool {
    let reach = |forward: bool| {
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let e = if forward { adj[i * k + j] } else { adj[j * k + i] };
                if e && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach(true) && reach(false)
}

/// Horizon used by the dissipativity and equilibrium probes.
pub const PROBE_HORIZON: f64 = 200.0;

/// Numerical probes of competitiveness, irreducibility, the source at the
/// origin, dissipativity and strict competition at equilibria.
pub fn check_structure(model: &ModelSpec, sample_points: &[Vec<f64>]) -> StructureReport {
    let k = model.k;
    let mut conditions = Vec::new();
    let mut jac = vec![0.0; k * k];

    let mut worst: Option<(f64, Vec<f64>, usize, usize)> = None;
    for p in sample_points {
        model.growth_jacobian_at(p, &mut jac);
        let tol = off_diag_tol(&jac);
        for i in 0..k {
            for j in 0..k {
                let v = jac[i * k + j];
                if i != j && v > tol && worst.as_ref().map_or(true, |w| v > w.0) {
                    worst = Some((v, p.clone(), i, j));
                }
            }
        }
    }
    conditions.push(match worst {
        None => ConditionResult {
            name: "competitive".into(),
            verdict: Verdict::Pass,
            witness: None,
            detail: format!("off-diagonal growth derivatives <= 0 at {} points", sample_points.len()),
        },
        Some((v, p, i, j)) => ConditionResult {
            name: "competitive".into(),
            verdict: Verdict::Fail,
            witness: Some(p),
            detail: format!("d_{j} g_{i} = {v:e} > 0"),
        },
    });

    let mut bad = None;
    if k > 1 {
        for p in sample_points {
            model.growth_jacobian_at(p, &mut jac);
            let tol = off_diag_tol(&jac);
            let adj: Vec<bool> = (0..k * k)
                .map(|idx| idx / k != idx % k && math::abs(jac[idx]) > tol)
                .collect();
            if !strongly_connected(&adj, k) {
                bad = Some(p.clone());
                break;
            }
        }
    }
    conditions.push(ConditionResult {
        name: "irreducible".into(),
        verdict: if bad.is_some() { Verdict::Fail } else { Verdict::Pass },
        detail: if bad.is_some() {
            "interaction graph not strongly connected".into()
        } else {
            "interaction graph strongly connected at every sample point".into()
        },
        witness: bad,
    });

    let zero = vec![0.0; k];
    model.drift_jacobian(&zero, &mut jac);
    let ev = linalg::eigenvalues(&jac, k);
    let min_re = ev.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    conditions.push(ConditionResult {
        name: "source_at_origin".into(),
        verdict: if min_re > 0.0 { Verdict::Pass } else { Verdict::Fail },
        witness: Some(zero),
        detail: format!("min Re eig DF(0) = {min_re:e}"),
    });

    let opts = OdeOptions::with_rtol(1e-8);
    let mut escape = None;
    let starts: Vec<Vec<f64>> = model
        .probe_points()
        .into_iter()
        .filter(|p| p.iter().any(|&v| v > 0.0))
        .collect();
    for p in &starts {
        match flow(model, p, PROBE_HORIZON, false, Direction::Forward, opts) {
            Ok(r) if r.endpoint.iter().all(|v| v.is_finite()) => {}
            _ => {
                escape = Some(p.clone());
                break;
            }
        }
    }
    conditions.push(ConditionResult {
        name: "dissipative".into(),
        verdict: if escape.is_some() { Verdict::Fail } else { Verdict::Pass },
        detail: format!(
            "probe, not proof: {} trajectories from the domain corners over t = {PROBE_HORIZON}",
            starts.len()
        ),
        witness: escape,
    });

    let mut found = 0usize;
    let mut fail = None;
    let mut f = vec![0.0; k];
    for p in sample_points.iter().filter(|p| p.iter().any(|&v| v > 0.0)) {
        let Ok(r) = flow(model, p, PROBE_HORIZON, false, Direction::Forward, opts) else {
            continue;
        };
        model.drift(&r.endpoint, &mut f);
        if math::norm(&f) > 1e-6 || r.endpoint.iter().all(|&v| v <= 1e-9) {
            continue;
        }
        found += 1;
        model.growth_jacobian_at(&r.endpoint, &mut jac);
        let tol = off_diag_tol(&jac);
        let ok = (0..k * k).all(|idx| idx / k == idx % k || jac[idx] < -tol);
        if !ok && fail.is_none() {
            fail = Some(r.endpoint.clone());
        }
    }
    conditions.push(ConditionResult {
        name: "strict_at_equilibria".into(),
        verdict: if fail.is_some() {
            Verdict::Fail
        } else if found == 0 {
            Verdict::Indeterminate
        } else {
            Verdict::Pass
        },
        detail: format!("{found} nonzero equilibria reached by forward flow"),
        witness: fail,
    });

    StructureReport { conditions }
}

/// Signed flow of `−𝓕` with an optional running integral.
///
/// Follows `φ_s(x)` for `s` from `0` to `t` (either sign) and, when `quad`
/// is given, accumulates `∫_0^t quad(φ_s x) ds`.
pub(crate) fn slow_flow_with(
    model: &ModelSpec,
    x0: &[f64],
    t: f64,
    want_fundamental: bool,
    quad: Option<&dyn Fn(&[f64]) -> Result<f64>>,
    opts: OdeOptions,
) -> Result<(FlowResult, f64)> {
    model.qn()?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("flow time {t}")));
    }
    let k = model.k;
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let mut y = x0.to_vec();
    if want_fundamental {
        y.extend(linalg::identity(k));
    }
    let qi = y.len();
    if quad.is_some() {
        y.push(0.0);
    }
    let mut jac = vec![0.0; k * k];
    let mut ode = Dopri5::new(y.len(), opts);
    let mut rhs = |_t: f64, y: &[f64], o: &mut [f64]| {
        let (state, rest) = y.split_at(qi);
        let (ostate, orest) = o.split_at_mut(qi);
        variational_rhs(model, Direction::Backward, state, ostate, &mut jac)?;
        if sign < 0.0 {
            for v in ostate.iter_mut() {
                *v = -*v;
            }
        }
        if let Some(q) = quad {
            orest[0] = sign * q(&state[..k])?;
        }
        let _ = rest;
        Ok(())
    };
    ode.integrate(&mut rhs, 0.0, math::abs(t), &mut y)?;
    let integral = if quad.is_some() { y[qi] } else { 0.0 };
    let fundamental = want_fundamental.then(|| y[k..k + k * k].to_vec());
    y.truncate(k);
    Ok((FlowResult { endpoint: y, t, fundamental, steps: ode.steps, est_error: ode.err_est }, integral))
}

/// `φ_t(x)` for either sign of `t`, with its fundamental matrix on request.
pub fn phi(model: &ModelSpec, x0: &[f64], t: f64, want_fundamental: bool, opts: OdeOptions) -> Result<FlowResult> {
    slow_flow_with(model, x0, t, want_fundamental, None, opts).map(|r| r.0)
}
