//! Geometry of the slow manifold `Ω = {R = 0}`: the radial projection, the
//! effective density, the projection `π` and time change `τ`, the transversal
//! eigenvalue `λ`, and the first and second derivatives of `π` and `τ`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::{self, Direction};
use crate::linalg;
use crate::math;
use crate::model::ModelSpec;
use crate::ode::{Dopri5, OdeOptions};

/// Radial projection `ρ(x) = x/Σx` with its derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Radial {
    pub rho: Vec<f64>,
    /// `d_rho[k·K + i] = ∂_i ρ_k`.
    pub d_rho: Vec<f64>,
    /// `d2_rho[(k·K + i)·K + j] = ∂_i ∂_j ρ_k`.
    pub d2_rho: Vec<f64>,
}

pub fn radial_projection(x: &[f64]) -> Result<Radial> {
    let k = x.len();
    let s: f64 = x.iter().sum();
    if !(s > 0.0) {
        return Err(Error::ZeroTotal);
    }
    let rho: Vec<f64> = x.iter().map(|v| v / s).collect();
    let kd = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut d_rho = vec![0.0; k * k];
    let mut d2_rho = vec![0.0; k * k * k];
    let s2 = s * s;
    for c in 0..k {
        for i in 0..k {
            d_rho[c * k + i] = (kd(i, c) - rho[c]) / s;
            for j in 0..k {
                d2_rho[(c * k + i) * k + j] = (2.0 * rho[c] - kd(i, c) - kd(j, c)) / s2;
            }
        }
    }
    Ok(Radial { rho, d_rho, d2_rho })
}

/// Default ray extent for [`effective_density`].
pub const RAY_LIMIT: f64 = 1e6;

/// `n_e(p)`: the root `t*` of `R(t·p) = 0`.
pub fn effective_density(model: &ModelSpec, p: &[f64]) -> Result<f64> {
    effective_density_within(model, p, RAY_LIMIT)
}

pub fn effective_density_within(model: &ModelSpec, p: &[f64], ray_limit: f64) -> Result<f64> {
    let qn = model.qn()?;
    let k = model.k;
    let mut y = vec![0.0; k];
    let mut g = vec![0.0; k];
    let mut eval = |t: f64| {
        for (yi, pi) in y.iter_mut().zip(p) {
            *yi = t * pi;
        }
        let r = (qn.r)(&y);
        let _ = model.grad_r(&y, &mut g);
        (r, math::dot(&g, p))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let (r, _) = eval(hi);
        if r <= 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > ray_limit {
            return Err(Error::NoBracket { extent: ray_limit });
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (r, dr) = eval(t);
        if math::abs(r) <= 1e-12 {
            return Ok(t);
        }
        if r > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - r / dr;
        t = if dr < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let (r, _) = eval(t);
    if math::abs(r) <= 1e-12 {
        Ok(t)
    } else {
        Err(Error::NotConverging { t, r })
    }
}

/// `λ(x) = DR(x)·𝓕(x)`.
pub fn lambda(model: &ModelSpec, x: &[f64]) -> Result<f64> {
    let k = model.k;
    let mut g = vec![0.0; k];
    let mut s = vec![0.0; k];
    model.grad_r(x, &mut g)?;
    model.slow_field(x, &mut s)?;
    Ok(math::dot(&g, &s))
}

/// [`lambda`], and on `Ω` also confirms that `λ` is the nonzero eigenvalue
/// of `DF(x)` to `1e-8`.
pub fn lambda_at(model: &ModelSpec, x: &[f64]) -> Result<f64> {
    let l = lambda(model, x)?;
    if math::abs(model.r(x)?) <= 1e-12 {
        let jac = fluid::jacobian_df(model, x)?;
        let ev = linalg::eigenvalues(&jac, model.k);
        let d = ev
            .iter()
            .map(|&(re, im)| math::abs(re - l) + math::abs(im))
            .fold(f64::INFINITY, f64::min);
        if d > 1e-8 * l.abs().max(1.0) {
            return Err(Error::ChartInvariant { name: "lambda_eigenvalue", residual: d });
        }
    }
    Ok(l)
}

/// Knobs for the projection and chart computations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ManifoldOptions {
    pub rtol: f64,
    /// Stop the forward flow once `|R| ≤ eps_switch`.
    pub eps_switch: f64,
    /// Decay is judged only after this many multiples of `1/|λ|`.
    pub min_horizon: f64,
    pub max_horizon: f64,
    pub pitau_tol: f64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, eps_switch: 1e-8, min_horizon: 8.0, max_horizon: 1e5, pitau_tol: 1e-6 }
    }
}

impl ManifoldOptions {
    pub fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.rtol * 1e-2, ..OdeOptions::default() }
    }
}

/// `π(x)` and `τ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub pi: Vec<f64>,
    pub tau: f64,
    pub lambda_at_pi: f64,
    /// Forward flow time spent before the tail closure.
    pub flow_time: f64,
    /// `‖φ_τ(π) − x‖`.
    pub pitau_residual: f64,
}

/// Newton iteration along `𝓕` that puts `p` on `Ω`.
pub fn polish_onto_omega(model: &ModelSpec, p: &mut [f64]) -> Result<()> {
    let k = model.k;
    let mut s = vec![0.0; k];
    for _ in 0..50 {
        let r = model.r(p)?;
        if math::abs(r) <= 1e-15 {
            return Ok(());
        }
        let l = lambda(model, p)?;
        if math::abs(l) < 1e-12 {
            return Err(Error::LambdaZero { value: l });
        }
        model.slow_field(p, &mut s)?;
        let step = r / l;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi -= step * si;
        }
        if math::abs(step) * math::norm(&s) <= 1e-16 * math::norm(p).max(1e-300) {
            return Ok(());
        }
    }
    let r = model.r(p)?;
    if math::abs(r) <= 1e-12 {
        Ok(())
    } else {
        Err(Error::NotConverging { t: 0.0, r })
    }
}

/// Projection without the back-flow check.
fn project_unchecked(model: &ModelSpec, x: &[f64], opts: &ManifoldOptions) -> Result<(Vec<f64>, f64, f64)> {
    let qn = model.qn()?;
    let k = model.k;
    let r0 = (qn.r)(x);
    if r0 == 0.0 {
        return Ok((x.to_vec(), 0.0, 0.0));
    }
    let mut y = x.to_vec();
    y.push(0.0);
    let mut jac = vec![];
    let mut ode = Dopri5::new(k + 1, opts.ode());
    let mut rhs = |_t: f64, y: &[f64], o: &mut [f64]| {
        fluid::variational_rhs(model, Direction::Forward, &y[..k], &mut o[..k], &mut jac)?;
        o[k] = (qn.r)(&y[..k]);
        Ok(())
    };
    let mut t = 0.0;
    let mut r;
    let (mut w_start, mut w_r) = (0.0f64, r0);
    loop {
        let l = lambda(model, &y[..k])?;
        let scale = if l < 0.0 { 1.0 / (-l) } else { 1.0 };
        let seg = (0.5 * scale).clamp(1e-3, 10.0);
        ode.integrate(&mut rhs, t, t + seg, &mut y)?;
        t += seg;
        r = (qn.r)(&y[..k]);
        if !r.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegratorBlowup { t, h: seg });
        }
        if math::abs(r) <= opts.eps_switch {
            break;
        }
        if t >= 2.0 * w_start.max(0.5 * seg) {
            if t >= opts.min_horizon * scale && math::abs(r) > 0.1 * math::abs(w_r) {
                return Err(Error::NotConverging { t, r });
            }
            w_start = t;
            w_r = r;
        }
        if t > opts.max_horizon {
            return Err(Error::NotConverging { t, r });
        }
    }
    let l = lambda(model, &y[..k])?;
    if !(l < 0.0) {
        return Err(Error::LambdaZero { value: l });
    }
    let tau = y[k] + r / (-l);
    let mut pi = y[..k].to_vec();
    polish_onto_omega(model, &mut pi)?;
    Ok((pi, tau, t))
}

/// `π(x)` and `τ(x)`, verified by flowing `φ_τ` from `π` back to `x`.
pub fn project_and_time(model: &ModelSpec, x: &[f64], opts: &ManifoldOptions) -> Result<Projection> {
    model.check_domain(x)?;
    let (pi, tau, flow_time) = project_unchecked(model, x, opts)?;
    let lambda_at_pi = lambda(model, &pi)?;
    if math::abs(lambda_at_pi) < 1e-12 {
        return Err(Error::LambdaZero { value: lambda_at_pi });
    }
    let back = fluid::phi(model, &pi, tau, false, opts.ode())?;
    let pitau_residual = math::norm(
        &back.endpoint.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>(),
    );
    if !(pitau_residual <= opts.pitau_tol) {
        return Err(Error::PitauViolation { residual: pitau_residual });
    }
    Ok(Projection { pi, tau, lambda_at_pi, flow_time, pitau_residual })
}

/// Everything the diffusion and harness layers need at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldChart {
    pub x: Vec<f64>,
    pub pi: Vec<f64>,
    pub tau: f64,
    pub lambda_at_pi: f64,
    pub n_e: f64,
    /// Row-major, `dpi[k·K + i] = ∂_i π_k`.
    pub dpi: Vec<f64>,
    pub dtau: Vec<f64>,
    /// `d2pi[(k·K + i)·K + j] = ∂_i ∂_j π_k`.
    pub d2pi: Option<Vec<f64>>,
    pub residuals: ChartResiduals,
}

/// Residuals of the five chart identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartResiduals {
    pub r_at_pi: f64,
    pub pitau: f64,
    pub constraint: f64,
    pub dpi_f: f64,
    pub dtau_f: f64,
}

/// Analytic `Dπ` and `Dτ` without the invariant checks.
fn derivatives(model: &ModelSpec, x: &[f64], proj: &Projection, opts: &ManifoldOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = model.k;
    let m = if proj.tau == 0.0 {
        linalg::identity(k)
    } else {
        fluid::phi(model, x, -proj.tau, true, opts.ode())?
            .fundamental
            .expect("fundamental requested")
    };
    let mut g = vec![0.0; k];
    let mut s = vec![0.0; k];
    model.grad_r(&proj.pi, &mut g)?;
    model.slow_field(&proj.pi, &mut s)?;
    let l = proj.lambda_at_pi;
    let gm = linalg::vec_mat(&g, &m);
    let dtau: Vec<f64> = gm.iter().map(|v| -v / l).collect();
    let mut dpi = m;
    for a in 0..k {
        for b in 0..k {
            dpi[a * k + b] -= s[a] * gm[b] / l;
        }
    }
    Ok((dpi, dtau))
}

/// `Dπ(x)` and `Dτ(x)` with every chart identity asserted.
pub fn dpi_dtau(model: &ModelSpec, x: &[f64], opts: &ManifoldOptions) -> Result<ManifoldChart> {
    let k = model.k;
    let proj = project_and_time(model, x, opts)?;
    let (dpi, dtau) = derivatives(model, x, &proj, opts)?;

    let r_pi = math::abs(model.r(&proj.pi)?);
    if r_pi > 1e-10 {
        return Err(Error::ChartInvariant { name: "R(pi)", residual: r_pi });
    }
    let mut g = vec![0.0; k];
    model.grad_r(&proj.pi, &mut g)?;
    let constraint = linalg::vec_mat(&g, &dpi).iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    if constraint > 1e-6 {
        return Err(Error::ChartInvariant { name: "DR(pi) Dpi", residual: constraint });
    }
    let mut f = vec![0.0; k];
    model.drift(x, &mut f);
    let fnorm = math::norm(&f);
    let mut df = vec![0.0; k];
    linalg::mat_vec(&dpi, &f, &mut df);
    let dpi_f = math::norm(&df);
    if dpi_f > 1e-8 * fnorm + 1e-14 {
        return Err(Error::ChartInvariant { name: "Dpi F", residual: dpi_f });
    }
    let r = model.r(x)?;
    let dtau_f = math::abs(math::dot(&dtau, &f) + r);
    if dtau_f > 1e-8 {
        return Err(Error::ChartInvariant { name: "Dtau F + R", residual: dtau_f });
    }
    let radial = radial_projection(x)?;
    let n_e = effective_density(model, &radial.rho)?;
    Ok(ManifoldChart {
        x: x.to_vec(),
        pi: proj.pi,
        tau: proj.tau,
        lambda_at_pi: proj.lambda_at_pi,
        n_e,
        dpi,
        dtau,
        d2pi: None,
        residuals: ChartResiduals { r_at_pi: r_pi, pitau: proj.pitau_residual, constraint, dpi_f, dtau_f },
    })
}

/// Relative step for [`d2pi`].
pub const D2_STEP: f64 = 1e-5;

/// Second partials of `π` by central differences of the analytic `Dπ`,
/// symmetrised in the last two indices. Returns the array and the relative
/// symmetry defect measured before symmetrisation.
pub fn d2pi(model: &ModelSpec, x: &[f64], opts: &ManifoldOptions) -> Result<(Vec<f64>, f64)> {
    let k = model.k;
    let mut out = vec![0.0; k * k * k];
    let mut xp = x.to_vec();
    for j in 0..k {
        let h = D2_STEP * math::abs(x[j]).max(1.0);
        xp[j] = x[j] + h;
        let plus = project_and_time(model, &xp, opts).and_then(|p| derivatives(model, &xp, &p, opts))?;
        xp[j] = x[j] - h;
        let minus = project_and_time(model, &xp, opts).and_then(|p| derivatives(model, &xp, &p, opts))?;
        xp[j] = x[j];
        for c in 0..k {
            for i in 0..k {
                out[(c * k + i) * k + j] = (plus.0[c * k + i] - minus.0[c * k + i]) / (2.0 * h);
            }
        }
    }
    let scale = linalg::max_norm(&out).max(1e-300);
    let mut defect = 0.0f64;
    for c in 0..k {
        for i in 0..k {
            for j in (i + 1)..k {
                let a = out[(c * k + i) * k + j];
                let b = out[(c * k + j) * k + i];
                defect = defect.max(math::abs(a - b) / scale);
                let m = 0.5 * (a + b);
                out[(c * k + i) * k + j] = m;
                out[(c * k + j) * k + i] = m;
            }
        }
    }
    Ok((out, defect))
}

/// Chart with second derivatives attached.
pub fn full_chart(model: &ModelSpec, x: &[f64], opts: &ManifoldOptions) -> Result<(ManifoldChart, f64)> {
    let mut chart = dpi_dtau(model, x, opts)?;
    let (d2, defect) = d2pi(model, x, opts)?;
    chart.d2pi = Some(d2);
    Ok((chart, defect))
}

/// `‖ψ_t x − φ_{τ(ψ_t x)} π(x)‖`.
pub fn psiphi_residual(model: &ModelSpec, x: &[f64], t: f64, opts: &ManifoldOptions) -> Result<f64> {
    let psi = fluid::flow(model, x, t, false, Direction::Forward, opts.ode())?.endpoint;
    let p0 = project_and_time(model, x, opts)?;
    let pt = project_and_time(model, &psi, opts)?;
    let back = fluid::phi(model, &p0.pi, pt.tau, false, opts.ode())?.endpoint;
    Ok(math::norm(&back.iter().zip(&psi).map(|(a, b)| a - b).collect::<Vec<_>>()))
}

/// `|R(x) + ∫_0^{τ(x)} λ(φ_s π(x)) ds|`.
pub fn rlam2_residual(model: &ModelSpec, x: &[f64], opts: &ManifoldOptions) -> Result<f64> {
    let proj = project_and_time(model, x, opts)?;
    let lam = |p: &[f64]| lambda(model, p);
    let (_, integral) = fluid::slow_flow_with(model, &proj.pi, proj.tau, false, Some(&lam), opts.ode())?;
    Ok(math::abs(model.r(x)? + integral))
}
