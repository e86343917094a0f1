//! The limiting diffusion on `Ω`: generator coefficients, a short-burst
//! Monte Carlo oracle for them, an Euler–Maruyama simulator and the change
//! of variables to relative frequencies.
//!
//! Time is measured on the accelerated clock `Z^N(t) = X^N(N t / 2) / N`.
//! The generator is `L f = b·∇f + ½ a:∇²f`.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{self, ManifoldOptions};
use crate::math;
use crate::model::ModelSpec;
use crate::process::{PopulationState, Ssa, SsaOptions, Stop};
use crate::rng::{self, Rng};
use crate::stats;

/// Ratio between the accelerated clock and the `N`-clock `X^N(N t)/N` on
/// which the coefficient formulas are naturally written.
pub const TIME_SCALE: f64 = 0.5;

/// Weight of the quadratic-variation drift block relative to the first-order
/// terms (the Itô ½).
pub const QV_DRIFT_FACTOR: f64 = 0.5;

/// Drift and diffusion split by origin. Each field is the contribution to
/// `b` (or `a`) after all scaling, so the terms add up to the totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTerms {
    pub mutation_direct: Vec<f64>,
    pub mutation_projection: Vec<f64>,
    pub selection_direct: Vec<f64>,
    pub selection_projection: Vec<f64>,
    pub qv_drift: Vec<f64>,
    /// Row-major `K×K`; equals `a`.
    pub qv_diffusion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCoefficients {
    pub point: Vec<f64>,
    pub drift: Vec<f64>,
    /// Row-major, symmetric.
    pub diffusion: Vec<f64>,
    pub terms: GeneratorTerms,
    pub lambda: f64,
    /// `DR(π)·b`.
    pub normal_drift: f64,
    /// `DR(π)·a·DR(π)`.
    pub normal_diffusion: f64,
    pub time_scale: f64,
}

/// Model quantities at a point of `Ω` that enter the generator.
struct Ingredients {
    k: usize,
    pi: Vec<f64>,
    theta: Vec<f64>,
    beta_bar: Vec<f64>,
    /// `β̌ + β̄`.
    q: Vec<f64>,
    gamma: Vec<f64>,
    /// `dgamma[j·K + k] = ∂_k γ_j`.
    dgamma: Vec<f64>,
    dr: Vec<f64>,
    hess: Vec<f64>,
    /// `ds[j·K + m] = ∂_m (γ_j x_j)`.
    ds: Vec<f64>,
    sigma: Vec<f64>,
    lambda: f64,
}

impl Ingredients {
    fn at(model: &ModelSpec, pi: &[f64]) -> Result<Self> {
        let k = model.k;
        let mut theta = vec![0.0; k * k];
        let mut beta_bar = vec![0.0; k];
        let mut beta_check = vec![0.0; k];
        let mut gamma = vec![0.0; k];
        let mut dgamma = vec![0.0; k * k];
        let mut dr = vec![0.0; k];
        let mut hess = vec![0.0; k * k];
        let mut sigma = vec![0.0; k];
        model.theta_at(pi, &mut theta);
        model.beta_bar(pi, &mut beta_bar);
        model.beta_check(pi, &mut beta_check);
        model.gamma(pi, &mut gamma)?;
        model.jac_gamma(pi, &mut dgamma)?;
        model.grad_r(pi, &mut dr)?;
        model.hess_r(pi, &mut hess)?;
        let mut ds = vec![0.0; k * k];
        model.slow_field_jacobian(pi, &mut ds)?;
        model.sigma_at(pi, &mut sigma);
        let q = beta_bar.iter().zip(&beta_check).map(|(a, b)| a + b).collect();
        let lambda = manifold::lambda(model, pi)?;
        Ok(Self { k, pi: pi.to_vec(), theta, beta_bar, q, gamma, dgamma, dr, hess, ds, sigma, lambda })
    }
}

/// Tolerance on `R(π)` for [`generator_coefficients`].
pub const OMEGA_TOL: f64 = 1e-8;

/// Drift and diffusion of the limiting generator at `π ∈ Ω`.
pub fn generator_coefficients(model: &ModelSpec, pi: &[f64]) -> Result<GeneratorCoefficients> {
    let r = model.r(pi)?;
    if math::abs(r) > OMEGA_TOL {
        return Err(Error::InvalidArgument(alloc::format!("point is off Omega (R = {r:e})")));
    }
    let g = Ingredients::at(model, pi)?;
    let l = g.lambda;
    if math::abs(l) < 1e-12 {
        return Err(Error::LambdaZero { value: l });
    }
    let k = g.k;
    let (p, th, bb, q, ga, dr) = (&g.pi, &g.theta, &g.beta_bar, &g.q, &g.gamma, &g.dr);

    let mut md = vec![0.0; k];
    let mut mp = vec![0.0; k];
    let mut sd = vec![0.0; k];
    let mut sp = vec![0.0; k];

    // Pieces that do not depend on i.
    let mut mut_flux = 0.0;
    for j in 0..k {
        for kk in 0..k {
            mut_flux += th[j * k + kk] * (dr[kk] - dr[j]) * bb[j] * p[j];
        }
    }
    let sel_flux: f64 = (0..k).map(|j| dr[j] * g.sigma[j] * p[j]).sum();
    for i in 0..k {
        for j in 0..k {
            md[i] += -th[i * k + j] * bb[i] * p[i] + th[j * k + i] * bb[j] * p[j];
        }
        mp[i] = -ga[i] * p[i] / l * mut_flux;
        sd[i] = p[i] * g.sigma[i];
        sp[i] = -p[i] * ga[i] / l * sel_flux;
    }
    let mut qv = qv_closed(&g);

    let mut c = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for kk in 0..k {
                s += dr[kk]
                    * (ga[i] * ga[kk] * dr[j] * q[j] + ga[j] * ga[kk] * dr[i] * q[i] - ga[i] * ga[j] * dr[kk] * q[kk])
                    * p[kk];
            }
            let diag = if i == j { q[i] } else { 0.0 };
            c[i * k + j] = p[i] * (diag - p[j] / (l * l) * s);
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let m = 0.5 * (c[i * k + j] + c[j * k + i]);
            c[i * k + j] = m;
            c[j * k + i] = m;
        }
    }

    let ts = TIME_SCALE;
    let scale = |v: &mut Vec<f64>, f: f64| v.iter_mut().for_each(|x| *x *= f);
    scale(&mut md, ts);
    scale(&mut mp, ts);
    scale(&mut sd, ts);
    scale(&mut sp, ts);
    scale(&mut qv, ts);
    scale(&mut c, ts);
    let drift: Vec<f64> = (0..k).map(|i| md[i] + mp[i] + sd[i] + sp[i] + qv[i]).collect();
    let normal_drift = math::dot(dr, &drift);
    let mut ad = vec![0.0; k];
    linalg::mat_vec(&c, dr, &mut ad);
    let normal_diffusion = math::dot(dr, &ad);
    Ok(GeneratorCoefficients {
        point: pi.to_vec(),
        drift,
        diffusion: c.clone(),
        terms: GeneratorTerms {
            mutation_direct: md,
            mutation_projection: mp,
            selection_direct: sd,
            selection_projection: sp,
            qv_drift: qv,
            qv_diffusion: c,
        },
        lambda: l,
        normal_drift,
        normal_diffusion,
        time_scale: ts,
    })
}

/// `½ D²π : Q` on the `N`-clock with `Q = diag(q∘π)`, from the second-order
/// structure of `π` at a point of `Ω`: with `s = γ∘π`, `g = ∇R`,
/// `P = I − s gᵀ/λ`, `D²π_k(s, ·) = −(P·Ds)_k` and `D²π_k(u, w) = −s_k
/// H(u, w)/λ` on the tangent space.
fn qv_closed(g: &Ingredients) -> Vec<f64> {
    let k = g.k;
    let l = g.lambda;
    let s: Vec<f64> = (0..k).map(|i| g.gamma[i] * g.pi[i]).collect();
    let w: Vec<f64> = (0..k).map(|i| g.q[i] * g.pi[i]).collect();
    let mut pm = linalg::identity(k);
    for a in 0..k {
        for b in 0..k {
            pm[a * k + b] -= s[a] * g.dr[b] / l;
        }
    }
    let mut trace = 0.0;
    let mut col = vec![0.0; k];
    let mut hc = vec![0.0; k];
    for a in 0..k {
        for i in 0..k {
            col[i] = pm[i * k + a];
        }
        linalg::mat_vec(&g.hess, &col, &mut hc);
        trace += w[a] * math::dot(&col, &hc);
    }
    let qg: Vec<f64> = (0..k).map(|a| w[a] * g.dr[a]).collect();
    let gqg = math::dot(&g.dr, &qg);
    let mut v = vec![0.0; k];
    linalg::mat_vec(&pm, &qg, &mut v);
    let mut u = vec![0.0; k];
    linalg::mat_vec(&g.ds, &v, &mut u);
    let mut dss = vec![0.0; k];
    linalg::mat_vec(&g.ds, &s, &mut dss);
    let mut pu = vec![0.0; k];
    linalg::mat_vec(&pm, &u, &mut pu);
    let mut pdss = vec![0.0; k];
    linalg::mat_vec(&pm, &dss, &mut pdss);
    (0..k)
        .map(|i| -s[i] * trace / (2.0 * l) - pu[i] / l - pdss[i] * gqg / (2.0 * l * l))
        .collect()
}

/// The quadratic-variation drift block written out term by term in `∂R`,
/// `∂γ` and `∂²R`, on the `N`-clock and without the Itô ½. Matches
/// `qv_closed` exactly when `R` is affine and differs from it otherwise.
fn qv_expanded(g: &Ingredients) -> Vec<f64> {
    let k = g.k;
    let l = g.lambda;
    let (p, q, ga, dr, h) = (&g.pi, &g.q, &g.gamma, &g.dr, &g.hess);
    let mut qv = vec![0.0; k];
    let s_dr: f64 = dr.iter().sum();
    let mass_gamma: f64 = (0..k).map(|j| ga[j] * p[j]).sum();
    // (∂_jR)² ∂_j(Σ_k ∂_kR / ∂_jR), expanded to avoid dividing by ∂_jR.
    let l7: f64 = (0..k)
        .map(|j| {
            let num: f64 = (0..k).map(|kk| h[kk * k + j]).sum::<f64>() * dr[j] - s_dr * h[j * k + j];
            num * q[j] * p[j]
        })
        .sum();
    let l9: f64 = (0..k)
        .map(|j| {
            let inner: f64 = (0..k)
                .map(|ll| (h[ll * k + j] * dr[j] - dr[ll] * h[j * k + j]) * ga[ll] * p[ll])
                .sum();
            inner * q[j] * p[j] * mass_gamma
        })
        .sum();
    let qr2: f64 = (0..k).map(|j| dr[j] * dr[j] * q[j] * p[j]).sum();

    for i in 0..k {
        let l5: f64 = 2.0
            * (0..k)
                .map(|j| dr[j] * (dr[j] * q[j] - dr[i] * q[i]) * ga[j] * p[j])
                .sum::<f64>();
        let mut l6 = 0.0;
        for j in 0..k {
            for kk in 0..k {
                // ∂_k(γ_j/γ_i)
                let dratio = (g.dgamma[j * k + kk] * ga[i] - ga[j] * g.dgamma[i * k + kk]) / (ga[i] * ga[i]);
                l6 += dr[j] * dr[kk] * dratio * q[j] * p[j] * p[kk];
            }
        }
        l6 *= ga[i];
        let l8 = qr2 * (0..k).map(|j| dr[j] * (ga[i] - ga[j]) * ga[j] * p[j]).sum::<f64>();
        qv[i] = ga[i] * p[i] / (l * l) * (l5 + l6 + l7 + (l8 - l9) / l);
    }
    qv
}

/// The expanded quadratic-variation drift, scaled like
/// [`GeneratorTerms::qv_drift`] so the two can be compared directly.
pub fn qv_drift_expanded(model: &ModelSpec, pi: &[f64]) -> Result<Vec<f64>> {
    let g = Ingredients::at(model, pi)?;
    if math::abs(g.lambda) < 1e-12 {
        return Err(Error::LambdaZero { value: g.lambda });
    }
    Ok(qv_expanded(&g).iter().map(|v| v * TIME_SCALE * QV_DRIFT_FACTOR).collect())
}

/// System size used to extract the order-`1/N` drift from finite-size rates.
pub const ITO_PROBE_N: f64 = 1e7;

/// The same coefficients by Itô's formula applied to `π(Z^N)`:
/// `b = Dπ·G + ½ D²π:Q` and `a = Dπ·Q·Dπᵀ`, with `Q` the jump covariance
/// rate and `G = lim N(F^N − F)` the order-`1/N` drift, both on the `N`-clock,
/// then rescaled to the accelerated clock. Independent of the closed-form
/// transcription in [`generator_coefficients`]; used to audit it.
pub fn ito_coefficients(model: &ModelSpec, pi: &[f64], opts: &ManifoldOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = model.k;
    let n = ITO_PROBE_N;
    let mut g = vec![0.0; k];
    let mut qm = vec![0.0; k * k];
    for c in &model.clutches {
        let xp = pi[c.parent];
        let lim = c.limit_rate(pi);
        let fin = c.rate_at(pi, n);
        for i in 0..k {
            let ni = f64::from(c.clutch[i]);
            g[i] += n * (fin - lim) * ni * xp;
            for j in 0..k {
                qm[i * k + j] += ni * f64::from(c.clutch[j]) * lim * xp;
            }
        }
    }
    for (i, d) in model.deaths.iter().enumerate() {
        g[i] -= n * (d.rate_at(pi, n) - (d.rate)(pi)) * pi[i];
        qm[i * k + i] += (d.rate)(pi) * pi[i];
    }
    let (chart, _) = manifold::full_chart(model, pi, opts)?;
    let d2 = chart.d2pi.expect("second derivatives requested");
    let dpi = chart.dpi;
    let mut b = vec![0.0; k];
    linalg::mat_vec(&dpi, &g, &mut b);
    for c in 0..k {
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += d2[(c * k + i) * k + j] * qm[i * k + j];
            }
        }
        b[c] += 0.5 * s;
    }
    let a = linalg::mat_mul(&linalg::mat_mul(&dpi, &qm, k, k, k), &linalg::transpose(&dpi, k), k, k, k);
    Ok((
        b.iter().map(|v| v * TIME_SCALE).collect(),
        a.iter().map(|v| v * TIME_SCALE).collect(),
    ))
}

/// What the oracle measures on each endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `π(Z)`.
    Projection,
    /// `ρ(π(Z))`, relative frequencies.
    Frequency,
}

/// Increments of one burst: `f(Z(h/2)) − f(Z(0))` and `f(Z(h)) − f(Z(0))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSample {
    pub half: Vec<f64>,
    pub full: Vec<f64>,
    pub events: u64,
}

/// Starting state and reference value shared by every burst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSetup {
    pub counts: Vec<u64>,
    pub system_size: u64,
    /// `π(Z(0))`.
    pub pi0: Vec<f64>,
    pub f0: Vec<f64>,
    pub h: f64,
    pub observable: Observable,
}

fn observe(model: &ModelSpec, z: &[f64], obs: Observable, opts: &ManifoldOptions) -> Result<Vec<f64>> {
    let p = manifold::project_and_time(model, z, opts)?.pi;
    match obs {
        Observable::Projection => Ok(p),
        Observable::Frequency => Ok(manifold::radial_projection(&p)?.rho),
    }
}

/// Projection options for oracle endpoints: they lie within `O(N^{-1/2})` of
/// `Ω`, so a looser integrator tolerance is ample.
pub fn oracle_manifold_options() -> ManifoldOptions {
    ManifoldOptions { rtol: 1e-10, ..ManifoldOptions::default() }
}

pub fn burst_setup(model: &ModelSpec, pi: &[f64], system_size: u64, h: f64, observable: Observable) -> Result<BurstSetup> {
    let (state, _) = PopulationState::from_density(pi, system_size);
    let z0 = state.density();
    let opts = oracle_manifold_options();
    let pi0 = manifold::project_and_time(model, &z0, &opts)?.pi;
    let f0 = observe(model, &z0, observable, &opts)?;
    Ok(BurstSetup { counts: state.counts, system_size, pi0, f0, h, observable })
}

/// Runs one burst of the exact chain over accelerated time `h` on stream
/// `rng`.
pub fn burst(model: &ModelSpec, setup: &BurstSetup, rng: &mut Rng) -> Result<BurstSample> {
    let n = setup.system_size as f64;
    let opts = oracle_manifold_options();
    let mut counts = setup.counts.clone();
    let mut ssa = Ssa::new(model, setup.system_size, SsaOptions::default());
    let mut t = 0.0;
    let t_half = 0.25 * n * setup.h;
    let t_full = 0.5 * n * setup.h;
    let take = |counts: &[u64], stop: Stop| -> Result<Vec<f64>> {
        if stop == Stop::Escaped {
            return Err(Error::DomainEscape { density: counts.iter().map(|&c| c as f64 / n).collect() });
        }
        let z: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let f = observe(model, &z, setup.observable, &opts)?;
        Ok(f.iter().zip(&setup.f0).map(|(a, b)| a - b).collect())
    };
    let s1 = ssa.advance(&mut counts, &mut t, t_half, rng, None)?;
    let half = take(&counts, s1)?;
    let s2 = ssa.advance(&mut counts, &mut t, t_full, rng, None)?;
    let full = take(&counts, s2)?;
    Ok(BurstSample { half, full, events: ssa.events })
}

/// Drift and diffusion estimates with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub drift: Vec<f64>,
    pub drift_se: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub diffusion_se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub pi0: Vec<f64>,
    pub system_size: u64,
    pub replicas: usize,
    pub h: f64,
    /// `E[Δ_h]/h` and `Cov(Δ_h)/h`.
    pub plain: MomentEstimates,
    /// Two-step Richardson extrapolation in `h`, removing the `O(h)` bias.
    pub richardson: MomentEstimates,
    pub events: u64,
}

fn mean_and_se(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, |r| r.len());
    let n = rows.len() as f64;
    let mut m = vec![0.0; d];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b / n;
        }
    }
    let mut v = vec![0.0; d];
    for r in rows {
        for i in 0..d {
            v[i] += (r[i] - m[i]) * (r[i] - m[i]);
        }
    }
    let se = v.iter().map(|s| math::sqrt(s / (n - 1.0) / n)).collect();
    (m, se)
}

/// Reduces burst samples (in replica order) to drift and diffusion estimates.
pub fn reduce_bursts(setup: &BurstSetup, samples: &[BurstSample]) -> OracleResult {
    let h = setup.h;
    let d = setup.f0.len();
    let n = samples.len() as f64;
    let corr = n / (n - 1.0);
    let full: Vec<Vec<f64>> = samples.iter().map(|s| s.full.iter().map(|v| v / h).collect()).collect();
    let (drift, drift_se) = mean_and_se(&full);
    let rich: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.half.iter().zip(&s.full).map(|(a, b)| (4.0 * a - b) / h).collect())
        .collect();
    let (rdrift, rdrift_se) = mean_and_se(&rich);

    let (m_half, _) = mean_and_se(&samples.iter().map(|s| s.half.clone()).collect::<Vec<_>>());
    let (m_full, _) = mean_and_se(&samples.iter().map(|s| s.full.clone()).collect::<Vec<_>>());
    let mut plain_rows = Vec::with_capacity(samples.len());
    let mut rich_rows = Vec::with_capacity(samples.len());
    for s in samples {
        let mut pr = vec![0.0; d * d];
        let mut rr = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let f = (s.full[i] - m_full[i]) * (s.full[j] - m_full[j]) * corr / h;
                let hf = (s.half[i] - m_half[i]) * (s.half[j] - m_half[j]) * corr / (0.5 * h);
                pr[i * d + j] = f;
                rr[i * d + j] = 2.0 * hf - f;
            }
        }
        plain_rows.push(pr);
        rich_rows.push(rr);
    }
    let (diffusion, diffusion_se) = mean_and_se(&plain_rows);
    let (rdiff, rdiff_se) = mean_and_se(&rich_rows);
    OracleResult {
        pi0: setup.pi0.clone(),
        system_size: setup.system_size,
        replicas: samples.len(),
        h,
        plain: MomentEstimates { drift, drift_se, diffusion, diffusion_se },
        richardson: MomentEstimates { drift: rdrift, drift_se: rdrift_se, diffusion: rdiff, diffusion_se: rdiff_se },
        events: samples.iter().map(|s| s.events).sum(),
    }
}

/// Short-time moments of `f(Z^N)` from `replicas` exact bursts, run
/// sequentially on streams `(seed, r)`.
pub fn jump_moment_oracle(
    model: &ModelSpec,
    pi: &[f64],
    system_size: u64,
    replicas: usize,
    h: f64,
    seed: u64,
    observable: Observable,
) -> Result<OracleResult> {
    if replicas < 2 {
        return Err(Error::InvalidArgument("need at least two replicas".into()));
    }
    let setup = burst_setup(model, pi, system_size, h, observable)?;
    let samples = (0..replicas)
        .map(|r| burst(model, &setup, &mut rng::replica_rng(seed, r as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce_bursts(&setup, &samples))
}

/// Realised Euler–Maruyama path on `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPath {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    /// `(time, type)` at which a coordinate reached zero and was frozen.
    pub absorptions: Vec<(f64, usize)>,
}

/// Coordinates at or below this value are treated as extinct.
pub const EXTINCTION_EPS: f64 = 1e-12;

/// Euler–Maruyama for the limiting diffusion, retracted onto `Ω` after each
/// step along `𝓕`. Extinct types stay at zero.
pub fn simulate_diffusion(model: &ModelSpec, pi0: &[f64], horizon: f64, dt: f64, seed: u64) -> Result<DiffusionPath> {
    let mut rng = rng::replica_rng(seed, 0);
    simulate_diffusion_with(model, pi0, horizon, dt, &mut rng, seed)
}

pub fn simulate_diffusion_with(
    model: &ModelSpec,
    pi0: &[f64],
    horizon: f64,
    dt: f64,
    rng: &mut Rng,
    seed: u64,
) -> Result<DiffusionPath> {
    let k = model.k;
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidArgument("need dt > 0 and horizon >= 0".into()));
    }
    let mut p = pi0.to_vec();
    manifold::polish_onto_omega(model, &mut p)?;
    let mut frozen: Vec<bool> = p.iter().map(|&v| v <= EXTINCTION_EPS).collect();
    for (v, f) in p.iter_mut().zip(&frozen) {
        if *f {
            *v = 0.0;
        }
    }
    let steps = math::round(horizon / dt) as usize;
    let mut times = vec![0.0];
    let mut points = vec![p.clone()];
    let mut absorptions = Vec::new();
    let sq = math::sqrt(dt);
    let mut xi = vec![0.0; k];
    for s in 1..=steps {
        let t = s as f64 * dt;
        let alive: usize = frozen.iter().filter(|f| !**f).count();
        if alive > 0 {
            let gc = generator_coefficients(model, &p)?;
            let l = linalg::psd_factor(&gc.diffusion, k, 1e-10)?;
            for x in xi.iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            let mut next = p.clone();
            for i in 0..k {
                if frozen[i] {
                    continue;
                }
                let noise: f64 = (0..k).map(|j| l[i * k + j] * xi[j]).sum();
                next[i] += gc.drift[i] * dt + noise * sq;
            }
            for i in 0..k {
                if !frozen[i] && next[i] <= EXTINCTION_EPS {
                    next[i] = 0.0;
                    frozen[i] = true;
                    absorptions.push((t, i));
                }
            }
            if next.iter().any(|&v| v > 0.0) {
                manifold::polish_onto_omega(model, &mut next)?;
            }
            for (v, f) in next.iter_mut().zip(&frozen) {
                if *f {
                    *v = 0.0;
                }
            }
            p = next;
        }
        times.push(t);
        points.push(p.clone());
    }
    Ok(DiffusionPath { times, points, seed, absorptions })
}

/// Coefficients of `P = ρ(Π)` on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCoefficients {
    pub p: Vec<f64>,
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub n_e: f64,
}

/// Itô change of variables through `ρ`: drift `Dρ·b + ½ D²ρ:a`, diffusion
/// `Dρ·a·Dρᵀ`.
pub fn pushforward_frequency(model: &ModelSpec, coeffs: &GeneratorCoefficients) -> Result<FrequencyCoefficients> {
    let k = model.k;
    let rad = manifold::radial_projection(&coeffs.point)?;
    let mut drift = vec![0.0; k];
    linalg::mat_vec(&rad.d_rho, &coeffs.drift, &mut drift);
    for c in 0..k {
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += rad.d2_rho[(c * k + i) * k + j] * coeffs.diffusion[i * k + j];
            }
        }
        drift[c] += 0.5 * s;
    }
    let da = linalg::mat_mul(&rad.d_rho, &coeffs.diffusion, k, k, k);
    let diffusion = linalg::mat_mul(&da, &linalg::transpose(&rad.d_rho, k), k, k, k);
    let n_e = manifold::effective_density(model, &rad.rho)?;
    Ok(FrequencyCoefficients { p: rad.rho, drift, diffusion, n_e })
}

/// `z`-scores of an oracle estimate against coefficients: drift entries
/// first, then the upper triangle of the diffusion matrix.
pub fn z_scores(est: &MomentEstimates, drift: &[f64], diffusion: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = drift.len();
    let zb = (0..k).map(|i| stats::z_score(est.drift[i], drift[i], est.drift_se[i])).collect();
    let mut za = Vec::new();
    for i in 0..k {
        for j in i..k {
            za.push(stats::z_score(est.diffusion[i * k + j], diffusion[i * k + j], est.diffusion_se[i * k + j]));
        }
    }
    (zb, za)
}
