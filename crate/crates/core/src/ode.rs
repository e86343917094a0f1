//! Adaptive Dormand–Prince 5(4) integrator.
//!
//! Integrates `y' = f(t, y)` over `[t0, t1]` with `t1 ≥ t0`. Backward-in-time
//! problems are handled by the caller flipping the sign of `f`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Tolerances and step limits.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; `None` picks one from the problem scale.
    pub h0: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 1_000_000, h0: None }
    }
}

impl OdeOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-2, ..Self::default() }
    }
}

/// Reusable integrator state; keeps the last accepted step size so that
/// consecutive segments restart cheaply.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub opts: OdeOptions,
    dim: usize,
    h: Option<f64>,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    ynew: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
    /// Largest scaled local-error estimate among accepted steps.
    pub err_est: f64,
}

impl Dopri5 {
    pub fn new(dim: usize, opts: OdeOptions) -> Self {
        Self {
            opts,
            dim,
            h: opts.h0,
            k: core::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            ynew: vec![0.0; dim],
            steps: 0,
            rejected: 0,
            err_est: 0.0,
        }
    }

    fn err_norm(&self, h: f64, y: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            let e = h * (E1 * self.k[0][i]
                + E3 * self.k[2][i]
                + E4 * self.k[3][i]
                + E5 * self.k[4][i]
                + E6 * self.k[5][i]
                + E7 * self.k[6][i]);
            let sc = self.opts.atol
                + self.opts.rtol * math::abs(y[i]).max(math::abs(self.ynew[i]));
            m = m.max(math::abs(e) / sc);
        }
        m
    }

    /// Advances `y` from `t0` to `t1`.
    pub fn integrate<F>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [f64]) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        debug_assert_eq!(y.len(), self.dim);
        if !(t1 >= t0) {
            return Err(Error::InvalidArgument("integration interval reversed".into()));
        }
        if t1 == t0 {
            return Ok(());
        }
        let span = t1 - t0;
        let mut t = t0;
        f(t, y, &mut self.k[0])?;
        let mut h = match self.h {
            Some(h) => h.min(span),
            None => {
                let d0 = math::norm(y) / math::sqrt(self.dim as f64);
                let d1 = math::norm(&self.k[0]) / math::sqrt(self.dim as f64);
                let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
                h.min(span)
            }
        };
        let h_min = 1e-14 * span.max(1.0);
        let mut n = 0usize;
        while t < t1 {
            if n >= self.opts.max_steps {
                return Err(Error::IntegratorBlowup { t, h });
            }
            n += 1;
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            self.stages(f, t, h, y)?;
            let err = self.err_norm(h, y);
            if !err.is_finite() || self.ynew.iter().any(|v| !v.is_finite()) {
                h *= 0.25;
                self.rejected += 1;
                if h < h_min {
                    return Err(Error::IntegratorBlowup { t, h });
                }
                continue;
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.ynew);
                let (a, b) = self.k.split_at_mut(6);
                a[0].copy_from_slice(&b[0]);
                self.steps += 1;
                self.err_est = self.err_est.max(err);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * math::powf(err, -0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = Some(h * fac);
                }
                h = (h * fac).min(t1 - t);
            } else {
                self.rejected += 1;
                h *= (0.9 * math::powf(err, -0.2)).clamp(0.1, 1.0);
                if h < h_min {
                    return Err(Error::IntegratorBlowup { t, h });
                }
            }
        }
        Ok(())
    }

    fn stages<F>(&mut self, f: &mut F, t: f64, h: f64, y: &[f64]) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let d = self.dim;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..d {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, tmp, k2)?;
        for i in 0..d {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, tmp, k3)?;
        for i in 0..d {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, tmp, k4)?;
        for i in 0..d {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, tmp, k5)?;
        for i in 0..d {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, tmp, k6)?;
        let ynew = &mut self.ynew;
        for i in 0..d {
            ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, ynew, k7)?;
        Ok(())
    }
}
