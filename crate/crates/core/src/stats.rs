//! Summary statistics used by the Monte Carlo checks.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r2: f64,
}

pub fn linear_fit(pts: &[(f64, f64)]) -> LinearFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    let slope_se = if pts.len() > 2 { math::sqrt(sse / (n - 2.0) / sxx) } else { f64::NAN };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit { slope, intercept, slope_se, r2 }
}

/// Least squares through the origin `y = c·x`; returns `(c, R²)` with `R²`
/// measured against the mean of `y`.
pub fn proportional_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let c = sxy / sxx;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sse: f64 = pts.iter().map(|p| (p.1 - c * p.0) * (p.1 - c * p.0)).sum();
    let sst: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    (c, if sst > 0.0 { 1.0 - sse / sst } else { 1.0 })
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_error(v: &[f64]) -> f64 {
    math::sqrt(variance(v) / v.len() as f64)
}

/// Linear-interpolation quantile, `q ∈ [0, 1]`.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(s.len() - 1);
    let w = pos - lo as f64;
    s[lo] * (1.0 - w) + s[hi] * w
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Standard error of the sample median via the binomial order-statistic
/// interval (about ±1 SD).
pub fn median_se(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let half = 0.5 * math::sqrt(n) / n;
    0.5 * (quantile(v, (0.5 + half).min(1.0)) - quantile(v, (0.5 - half).max(0.0)))
}

/// Sample mean vector and covariance matrix of `d`-dimensional rows, with
/// standard errors of each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// Row-major `d×d`.
    pub cov: Vec<f64>,
    pub cov_se: Vec<f64>,
}

pub fn moments(rows: &[Vec<f64>]) -> MomentEstimate {
    let d = rows.first().map_or(0, |r| r.len());
    let n = rows.len() as f64;
    let mut mean = alloc::vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut cov = alloc::vec![0.0; d * d];
    let mut m4 = alloc::vec![0.0; d * d];
    let mut var = alloc::vec![0.0; d];
    for r in rows {
        for i in 0..d {
            let ci = r[i] - mean[i];
            var[i] += ci * ci;
            for j in 0..d {
                let p = ci * (r[j] - mean[j]);
                cov[i * d + j] += p;
                m4[i * d + j] += p * p;
            }
        }
    }
    let mean_se = var.iter().map(|v| math::sqrt(v / (n - 1.0) / n)).collect();
    let mut cov_se = alloc::vec![0.0; d * d];
    for idx in 0..d * d {
        let c = cov[idx] / (n - 1.0);
        let e2 = m4[idx] / n;
        cov_se[idx] = math::sqrt(((e2 - c * c) / n).max(0.0));
        cov[idx] = c;
    }
    MomentEstimate { mean, mean_se, cov, cov_se }
}

/// `z = (observed − expected) / se`; zero when both the difference and the
/// error vanish.
pub fn z_score(observed: f64, expected: f64, se: f64) -> f64 {
    let d = observed - expected;
    if se > 0.0 {
        d / se
    } else if math::abs(d) <= 1e-12 * (1.0 + math::abs(expected)) {
        0.0
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn z_score_of_exact_match() {
        assert_eq!(z_score(0.0, 0.0, 0.0), 0.0);
        assert!(z_score(1.0, 0.0, 0.0).is_infinite());
    }
}
