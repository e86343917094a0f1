//! Small dense helpers over row-major `Vec<f64>` matrices, with nalgebra for
//! the eigen-decompositions.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math;

pub fn identity(k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
    }
    m
}

/// `C = A·B` with `A` of shape `n×m` and `B` of shape `m×p`.
pub fn mat_mul(a: &[f64], b: &[f64], n: usize, m: usize, p: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * p];
    for i in 0..n {
        for l in 0..m {
            let ail = a[i * m + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..p {
                c[i * p + j] += ail * b[l * p + j];
            }
        }
    }
    c
}

/// `out = A·v` for square `A`.
pub fn mat_vec(a: &[f64], v: &[f64], out: &mut [f64]) {
    let k = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = math::dot(&a[i * k..(i + 1) * k], v);
    }
}

/// `vᵀ·A` for square `A`.
pub fn vec_mat(v: &[f64], a: &[f64]) -> Vec<f64> {
    let k = v.len();
    let mut out = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            out[j] += v[i] * a[i * k + j];
        }
    }
    out
}

pub fn transpose(a: &[f64], k: usize) -> Vec<f64> {
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            t[j * k + i] = a[i * k + j];
        }
    }
    t
}

/// Max-abs entry.
pub fn max_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
}

/// Frobenius norm.
pub fn frobenius(a: &[f64]) -> f64 {
    math::norm(a)
}

fn to_dmatrix(a: &[f64], k: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(k, k, a)
}

pub fn det(a: &[f64], k: usize) -> f64 {
    to_dmatrix(a, k).determinant()
}

/// Eigenvalues of a general real matrix as `(re, im)` pairs.
pub fn eigenvalues(a: &[f64], k: usize) -> Vec<(f64, f64)> {
    to_dmatrix(a, k)
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect()
}

/// Eigen-decomposition of the symmetric part of `a`. Returns the eigenvalues
/// and the eigenvectors as columns of a row-major matrix.
pub fn sym_eigen(a: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let m = to_dmatrix(a, k);
    let s = (&m + m.transpose()) * 0.5;
    let e = s.symmetric_eigen();
    let mut vecs = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            vecs[i * k + j] = e.eigenvectors[(i, j)];
        }
    }
    (e.eigenvalues.iter().copied().collect(), vecs)
}

/// Factor `L` with `L·Lᵀ = a` after symmetrising `a` and flooring eigenvalues
/// that sit within `rel_floor·‖a‖` below zero. More negative eigenvalues are
/// an error.
pub fn psd_factor(a: &[f64], k: usize, rel_floor: f64) -> Result<Vec<f64>> {
    let (vals, vecs) = sym_eigen(a, k);
    let scale = max_norm(a);
    let mut l = vec![0.0; k * k];
    for (c, &v) in vals.iter().enumerate() {
        if v < -rel_floor * scale {
            return Err(Error::ChartInvariant { name: "psd", residual: v });
        }
        let s = math::sqrt(v.max(0.0));
        for r in 0..k {
            l[r * k + c] = vecs[r * k + c] * s;
        }
    }
    Ok(l)
}

/// Solves `A·x = b` by LU; `None` when singular.
pub fn solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let lu = to_dmatrix(a, k).lu();
    let rhs = nalgebra::DVector::from_column_slice(b);
    lu.solve(&rhs).map(|x| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_rank_one_block() {
        let mut ev = eigenvalues(&[-0.3, -0.3, -0.7, -0.7], 2);
        ev.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!((ev[0].0 + 1.0).abs() < 1e-12 && ev[1].0.abs() < 1e-12);
    }

    #[test]
    fn psd_factor_reproduces_matrix() {
        let a = [2.0, 0.5, 0.5, 1.0];
        let l = psd_factor(&a, 2, 1e-10).unwrap();
        let llt = mat_mul(&l, &transpose(&l, 2), 2, 2, 2);
        for (x, y) in llt.iter().zip(a) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(psd_factor(&[1.0, 0.0, 0.0, -1.0], 2, 1e-10).is_err());
    }
}
