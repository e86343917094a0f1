//! Process families: clutch rates, death rates, the order-`1/N` corrections
//! and the optional quasi-neutral structure `(γ, R)`.
//!
//! All rate functions take the density vector `x = X/N`. Rates with an
//! explicit finite-`N` form receive `N` as a second argument.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;

/// `x ↦ f(x)`.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `(x, N) ↦ f^N(x)`.
pub type SizedScalarFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
/// `x ↦ v(x)`, written into the output slice.
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `x ↦ M(x)`, a `K×K` matrix written row-major into the output slice.
pub type MatrixFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// `(x, N, birth, death)`: every finite-size per-capita rate at once, clutches
/// in model order. An optional fast path for the simulator; it must agree
/// with the individual rate functions.
pub type RateKernel = Arc<dyn Fn(&[f64], f64, &mut [f64], &mut [f64]) + Send + Sync>;

/// Per-capita rate at which a type-`parent` individual produces `clutch`.
#[derive(Clone)]
pub struct ClutchRate {
    pub parent: usize,
    pub clutch: Vec<u32>,
    /// Limiting rate `β_{i,n}(x)`.
    pub rate: ScalarFn,
    /// Finite-size rate `β^N_{i,n}(x)`; `None` means `β^N ≡ β`.
    pub rate_n: Option<SizedScalarFn>,
}

impl ClutchRate {
    pub fn new(parent: usize, clutch: Vec<u32>, rate: ScalarFn) -> Self {
        Self { parent, clutch, rate, rate_n: None }
    }

    pub fn with_finite_size(mut self, rate_n: SizedScalarFn) -> Self {
        self.rate_n = Some(rate_n);
        self
    }

    /// `|n|`, the total offspring count.
    pub fn size(&self) -> u32 {
        self.clutch.iter().sum()
    }

    /// True when every offspring has the parent's type (`n = |n| e_i`).
    pub fn is_same_type(&self) -> bool {
        self.clutch
            .iter()
            .enumerate()
            .all(|(j, &c)| j == self.parent || c == 0)
    }

    #[inline]
    pub fn limit_rate(&self, x: &[f64]) -> f64 {
        (self.rate)(x)
    }

    #[inline]
    pub fn rate_at(&self, x: &[f64], n: f64) -> f64 {
        match &self.rate_n {
            Some(f) => f(x, n),
            None => (self.rate)(x),
        }
    }
}

impl fmt::Debug for ClutchRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClutchRate")
            .field("parent", &self.parent)
            .field("clutch", &self.clutch)
            .field("finite_size", &self.rate_n.is_some())
            .finish()
    }
}

/// Per-capita death rate `δ_i`, with optional finite-size form `δ^N_i`.
#[derive(Clone)]
pub struct DeathRate {
    pub rate: ScalarFn,
    pub rate_n: Option<SizedScalarFn>,
}

impl DeathRate {
    pub fn new(rate: ScalarFn) -> Self {
        Self { rate, rate_n: None }
    }

    pub fn with_finite_size(mut self, rate_n: SizedScalarFn) -> Self {
        self.rate_n = Some(rate_n);
        self
    }

    #[inline]
    pub fn rate_at(&self, x: &[f64], n: f64) -> f64 {
        match &self.rate_n {
            Some(f) => f(x, n),
            None => (self.rate)(x),
        }
    }
}

impl fmt::Debug for DeathRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeathRate")
            .field("finite_size", &self.rate_n.is_some())
            .finish()
    }
}

/// Factorisation `β̄_i(x) − δ_i(x) = γ_i(x) R(x)`, so that
/// `F_i(x) = γ_i(x) x_i R(x)` and `Ω = {R = 0}` is a manifold of equilibria.
#[derive(Clone)]
pub struct QuasiNeutral {
    pub gamma: VectorFn,
    pub r: ScalarFn,
    pub grad_r: Option<VectorFn>,
    pub jac_gamma: Option<MatrixFn>,
}

impl fmt::Debug for QuasiNeutral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuasiNeutral")
            .field("analytic_grad_r", &self.grad_r.is_some())
            .field("analytic_jac_gamma", &self.jac_gamma.is_some())
            .finish()
    }
}

/// A complete process family.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub k: usize,
    pub clutches: Vec<ClutchRate>,
    pub deaths: Vec<DeathRate>,
    /// `σ_i(x)`; `None` means identically zero.
    pub sigma: Option<VectorFn>,
    /// `θ_ij(x)` row-major; `None` means identically zero.
    pub theta: Option<MatrixFn>,
    pub quasi_neutral: Option<QuasiNeutral>,
    /// Analytic `∂_j(β̄_i − δ_i)`, row-major.
    pub growth_jacobian: Option<MatrixFn>,
    /// Closed box `[lo_i, hi_i]` on which every rate function is valid.
    pub domain: Vec<(f64, f64)>,
    pub rate_kernel: Option<RateKernel>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("clutches", &self.clutches)
            .field("quasi_neutral", &self.quasi_neutral.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

/// Central-difference step for first derivatives.
#[inline]
pub(crate) fn fd_step(xj: f64) -> f64 {
    math::cbrt(f64::EPSILON) * math::abs(xj).max(1.0)
}

/// Central-difference Jacobian of `f: R^k -> R^m`, row-major `m×k`.
pub(crate) fn fd_jacobian(
    x: &[f64],
    m: usize,
    out: &mut [f64],
    mut f: impl FnMut(&[f64], &mut [f64]),
) {
    let k = x.len();
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; m];
    let mut fm = vec![0.0; m];
    for j in 0..k {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        f(&xp, &mut fp);
        xp[j] = x[j] - h;
        f(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..m {
            out[i * k + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
}

impl ModelSpec {
    pub fn builder(name: impl Into<String>, k: usize) -> ModelBuilder {
        ModelBuilder {
            spec: ModelSpec {
                name: name.into(),
                k,
                clutches: Vec::new(),
                deaths: Vec::new(),
                sigma: None,
                theta: None,
                quasi_neutral: None,
                growth_jacobian: None,
                domain: vec![(0.0, f64::INFINITY); k],
                rate_kernel: None,
            },
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.domain)
            .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::DomainEscape { density: x.to_vec() })
        }
    }

    pub fn qn(&self) -> Result<&QuasiNeutral> {
        self.quasi_neutral.as_ref().ok_or(Error::MissingQuasiNeutral)
    }

    pub fn is_quasi_neutral(&self) -> bool {
        self.quasi_neutral.is_some()
    }

    /// `β̄_i(x) = Σ_m m β_{i,m e_i}(x)` over same-type clutches.
    pub fn beta_bar(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for c in self.clutches.iter().filter(|c| c.is_same_type()) {
            out[c.parent] += f64::from(c.size()) * c.limit_rate(x);
        }
    }

    /// `β̌_i(x) = Σ_m m² β_{i,m e_i}(x)` over same-type clutches.
    pub fn beta_check(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for c in self.clutches.iter().filter(|c| c.is_same_type()) {
            let m = f64::from(c.size());
            out[c.parent] += m * m * c.limit_rate(x);
        }
    }

    /// Per-capita net growth `β̄_i(x) − δ_i(x)`.
    pub fn growth(&self, x: &[f64], out: &mut [f64]) {
        self.beta_bar(x, out);
        for (o, d) in out.iter_mut().zip(&self.deaths) {
            *o -= (d.rate)(x);
        }
    }

    /// Limit vector field `F_i(x) = (β̄_i(x) − δ_i(x)) x_i`.
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.growth(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o *= xi;
        }
    }

    /// `∂_j(β̄_i − δ_i)(x)`, analytic when supplied.
    pub fn growth_jacobian_at(&self, x: &[f64], out: &mut [f64]) {
        match &self.growth_jacobian {
            Some(j) => j(x, out),
            None => fd_jacobian(x, self.k, out, |y, o| self.growth(y, o)),
        }
    }

    /// `DF(x)`, assembled from the growth Jacobian.
    pub fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let k = self.k;
        self.growth_jacobian_at(x, out);
        let mut g = vec![0.0; k];
        self.growth(x, &mut g);
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] *= x[i];
            }
            out[i * k + i] += g[i];
        }
    }

    pub fn r(&self, x: &[f64]) -> Result<f64> {
        Ok((self.qn()?.r)(x))
    }

    pub fn grad_r(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let qn = self.qn()?;
        match &qn.grad_r {
            Some(g) => g(x, out),
            None => fd_jacobian(x, 1, out, |y, o| o[0] = (qn.r)(y)),
        }
        Ok(())
    }

    /// Hessian of `R` by central differences of the gradient, symmetrised.
    pub fn hess_r(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.qn()?;
        let k = self.k;
        fd_jacobian(x, k, out, |y, o| {
            let _ = self.grad_r(y, o);
        });
        for i in 0..k {
            for j in (i + 1)..k {
                let s = 0.5 * (out[i * k + j] + out[j * k + i]);
                out[i * k + j] = s;
                out[j * k + i] = s;
            }
        }
        Ok(())
    }

    pub fn gamma(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.qn()?.gamma)(x, out);
        Ok(())
    }

    pub fn jac_gamma(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let qn = self.qn()?;
        match &qn.jac_gamma {
            Some(j) => j(x, out),
            None => fd_jacobian(x, self.k, out, |y, o| (qn.gamma)(y, o)),
        }
        Ok(())
    }

    /// Slow field `𝓕_i(x) = γ_i(x) x_i`.
    pub fn slow_field(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.gamma(x, out)?;
        for (o, xi) in out.iter_mut().zip(x) {
            *o *= xi;
        }
        Ok(())
    }

    /// `D𝓕_ij = ∂_jγ_i x_i + γ_i δ_ij`.
    pub fn slow_field_jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let k = self.k;
        self.jac_gamma(x, out)?;
        let mut g = vec![0.0; k];
        self.gamma(x, &mut g)?;
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] *= x[i];
            }
            out[i * k + i] += g[i];
        }
        Ok(())
    }

    pub fn sigma_at(&self, x: &[f64], out: &mut [f64]) {
        match &self.sigma {
            Some(s) => s(x, out),
            None => out.fill(0.0),
        }
    }

    pub fn theta_at(&self, x: &[f64], out: &mut [f64]) {
        match &self.theta {
            Some(t) => t(x, out),
            None => out.fill(0.0),
        }
    }

    /// Corner and centre points of the domain box (infinite edges capped).
    pub(crate) fn probe_points(&self) -> Vec<Vec<f64>> {
        let k = self.k;
        let cap = |v: f64| if v.is_finite() { v } else { 10.0 };
        let mut pts = Vec::new();
        let corners = if k <= 10 { 1usize << k } else { 0 };
        for mask in 0..corners {
            pts.push(
                (0..k)
                    .map(|i| {
                        let (lo, hi) = self.domain[i];
                        if mask >> i & 1 == 1 { cap(hi) } else { lo }
                    })
                    .collect(),
            );
        }
        pts.push(
            self.domain
                .iter()
                .map(|&(lo, hi)| 0.5 * (lo + cap(hi)))
                .collect(),
        );
        pts
    }
}

/// Incremental [`ModelSpec`] construction with validation in [`ModelBuilder::build`].
#[derive(Debug)]
pub struct ModelBuilder {
    spec: ModelSpec,
}

impl ModelBuilder {
    pub fn clutch(mut self, c: ClutchRate) -> Self {
        self.spec.clutches.push(c);
        self
    }

    pub fn death(mut self, d: DeathRate) -> Self {
        self.spec.deaths.push(d);
        self
    }

    pub fn sigma(mut self, f: VectorFn) -> Self {
        self.spec.sigma = Some(f);
        self
    }

    pub fn theta(mut self, f: MatrixFn) -> Self {
        self.spec.theta = Some(f);
        self
    }

    pub fn quasi_neutral(mut self, qn: QuasiNeutral) -> Self {
        self.spec.quasi_neutral = Some(qn);
        self
    }

    pub fn growth_jacobian(mut self, f: MatrixFn) -> Self {
        self.spec.growth_jacobian = Some(f);
        self
    }

    pub fn domain_box(mut self, domain: Vec<(f64, f64)>) -> Self {
        self.spec.domain = domain;
        self
    }

    pub fn rate_kernel(mut self, f: RateKernel) -> Self {
        self.spec.rate_kernel = Some(f);
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        let s = self.spec;
        let k = s.k;
        let bad = |m: String| Err(Error::InvalidModel(m));
        if k == 0 {
            return bad("K must be at least 1".into());
        }
        if s.deaths.len() != k {
            return bad(alloc::format!("{} death rates for K = {k}", s.deaths.len()));
        }
        if s.domain.len() != k || s.domain.iter().any(|&(lo, hi)| !(lo >= 0.0 && lo <= hi)) {
            return bad("domain box must be K intervals [lo, hi] with 0 <= lo <= hi".into());
        }
        for (idx, c) in s.clutches.iter().enumerate() {
            if c.parent >= k || c.clutch.len() != k {
                return bad(alloc::format!("clutch {idx} has wrong dimension or parent"));
            }
            if c.size() == 0 {
                return bad(alloc::format!("clutch {idx} is empty; deaths belong in delta"));
            }
        }
        let probes = s.probe_points();
        if let Some(theta) = &s.theta {
            let mut t = vec![0.0; k * k];
            for p in &probes {
                theta(p, &mut t);
                for i in 0..k {
                    if t[i * k + i] != 0.0 {
                        return bad("theta_ii must vanish".into());
                    }
                }
                if t.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return bad("theta must be finite and non-negative".into());
                }
            }
        }
        if let Some(kern) = &s.rate_kernel {
            let mut b = vec![0.0; s.clutches.len()];
            let mut d = vec![0.0; k];
            for p in &probes {
                for n in [10.0, 1e4] {
                    kern(p, n, &mut b, &mut d);
                    let births = s.clutches.iter().zip(&b).map(|(c, v)| (c.rate_at(p, n), *v));
                    let deaths = s.deaths.iter().zip(&d).map(|(c, v)| (c.rate_at(p, n), *v));
                    for (want, got) in births.chain(deaths) {
                        if math::abs(want - got) > 1e-12 * (1.0 + math::abs(want)) {
                            return bad(alloc::format!("rate kernel disagrees with rate functions at {p:?}, N = {n}"));
                        }
                    }
                }
            }
        }
        if let Some(qn) = &s.quasi_neutral {
            let zero = vec![0.0; k];
            let r0 = (qn.r)(&zero);
            if math::abs(r0 - 1.0) > 1e-12 {
                return bad(alloc::format!("R(0) = {r0}, expected 1"));
            }
            let mut g = vec![0.0; k];
            for p in &probes {
                (qn.gamma)(p, &mut g);
                if g.iter().any(|&v| !(v > 0.0)) {
                    return bad(alloc::format!("gamma not positive at {p:?}"));
                }
            }
        }
        Ok(s)
    }
}

/// Wraps a plain closure as a [`ScalarFn`].
pub fn scalar(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

/// Wraps a plain closure as a [`SizedScalarFn`].
pub fn sized(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> SizedScalarFn {
    Arc::new(f)
}

/// Wraps a plain closure as a [`VectorFn`] (or [`MatrixFn`]).
pub fn vector(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> VectorFn {
    Arc::new(f)
}

/// Unit clutch `e_i` in dimension `k`.
pub fn unit_clutch(k: usize, i: usize, m: u32) -> Vec<u32> {
    let mut c = vec![0; k];
    c[i] = m;
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic() -> ModelSpec {
        ModelSpec::builder("t", 2)
            .clutch(ClutchRate::new(0, unit_clutch(2, 0, 1), scalar(|_| 1.0)))
            .clutch(ClutchRate::new(0, unit_clutch(2, 0, 2), scalar(|_| 0.5)))
            .clutch(ClutchRate::new(1, unit_clutch(2, 1, 1), scalar(|_| 1.0)))
            .clutch(ClutchRate::new(1, unit_clutch(2, 0, 1), scalar(|_| 0.0)))
            .death(DeathRate::new(scalar(|x| x[0] + x[1])))
            .death(DeathRate::new(scalar(|x| x[0] + x[1])))
            .domain_box(vec![(0.0, 3.0); 2])
            .build()
            .unwrap()
    }

    #[test]
    fn moments_skip_off_type_clutches() {
        let m = logistic();
        let mut b = [0.0; 2];
        m.beta_bar(&[0.2, 0.3], &mut b);
        assert_eq!(b, [2.0, 1.0]);
        m.beta_check(&[0.2, 0.3], &mut b);
        assert_eq!(b, [3.0, 1.0]);
    }

    #[test]
    fn fd_drift_jacobian_matches_hand_value() {
        let m = logistic();
        let x = [0.2, 0.3];
        let mut j = [0.0; 4];
        m.drift_jacobian(&x, &mut j);
        // F_0 = (2 - s) x0, F_1 = (1 - s) x1
        let want = [2.0 - 0.5 - 0.2, -0.2, -0.3, 1.0 - 0.5 - 0.3];
        for (a, b) in j.iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "{j:?}");
        }
    }

    #[test]
    fn builder_rejects_empty_clutch_and_bad_r0() {
        let r = ModelSpec::builder("e", 1)
            .clutch(ClutchRate::new(0, vec![0], scalar(|_| 1.0)))
            .death(DeathRate::new(scalar(|_| 1.0)))
            .build();
        assert!(matches!(r, Err(Error::InvalidModel(_))));
        let r = ModelSpec::builder("e", 1)
            .death(DeathRate::new(scalar(|_| 1.0)))
            .quasi_neutral(QuasiNeutral {
                gamma: vector(|_, o| o[0] = 1.0),
                r: scalar(|x| 2.0 - x[0]),
                grad_r: None,
                jac_gamma: None,
            })
            .domain_box(vec![(0.0, 2.0)])
            .build();
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }
}
