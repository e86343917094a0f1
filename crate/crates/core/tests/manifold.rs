use nalgebra::{DMatrix, DVector};
use qnpop_core::fluid;
use qnpop_core::manifold::{self, ManifoldOptions};
use qnpop_core::model::{scalar, unit_clutch, vector, ClutchRate, DeathRate, ModelSpec, QuasiNeutral};
use qnpop_core::ode::OdeOptions;
use qnpop_core::zoo;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

// Clutch e_i at rate b, death b − γ·R, so F_i = γ x_i R.
fn linear_r(c: [f64; 2], gamma: f64) -> ModelSpec {
    let b = 2.0 * gamma;
    let r = move |x: &[f64]| 1.0 - c[0] * x[0] - c[1] * x[1];
    ModelSpec::builder("linear_r", 2)
        .clutch(ClutchRate::new(0, unit_clutch(2, 0, 1), scalar(move |_| b)))
        .clutch(ClutchRate::new(1, unit_clutch(2, 1, 1), scalar(move |_| b)))
        .death(DeathRate::new(scalar(move |x| b - gamma * r(x))))
        .death(DeathRate::new(scalar(move |x| b - gamma * r(x))))
        .quasi_neutral(QuasiNeutral {
            gamma: vector(move |_, o| o.fill(gamma)),
            r: scalar(r),
            grad_r: None,
            jac_gamma: None,
        })
        .domain_box(vec![(0.0, 3.0), (0.0, 3.0)])
        .build()
        .unwrap()
}

#[test]
fn radial_hand_values() {
    let r = manifold::radial_projection(&[2.0, 2.0]).unwrap();
    assert_eq!(r.rho, vec![0.5, 0.5]);
    let r = manifold::radial_projection(&[1.0, 3.0]).unwrap();
    close(r.d_rho[0], 0.1875, 1e-15);
    for x in [[1.0, 3.0, 0.5], [0.2, 0.1, 4.0], [7.0, 0.0, 1.0]] {
        let r = manifold::radial_projection(&x).unwrap();
        for c in 0..3 {
            let euler: f64 = (0..3).map(|i| r.d_rho[c * 3 + i] * x[i]).sum();
            assert!(euler.abs() < 1e-15);
        }
    }
    assert!(manifold::radial_projection(&[0.0, 0.0]).is_err());
}

#[test]
fn effective_density_hand_values() {
    let e1 = zoo::e1();
    for p in [0.0, 0.3, 1.0] {
        close(manifold::effective_density(&e1.spec, &[p, 1.0 - p]).unwrap(), 1.0, 1e-12);
    }
    let m = linear_r([1.0, 2.0], 1.0);
    close(manifold::effective_density(&m, &[0.5, 0.5]).unwrap(), 2.0 / 3.0, 1e-12);
    let m = linear_r([0.5, 1.0], 1.0);
    close(manifold::effective_density(&m, &[1.0, 0.0]).unwrap(), 2.0, 1e-12);
}

#[test]
fn lambda_is_linear_in_gamma() {
    let one = linear_r([1.0, 2.0], 1.0);
    let two = linear_r([1.0, 2.0], 2.0);
    for x in [[0.1, 0.2], [0.5, 0.25], [1.0, 1.0]] {
        let a = manifold::lambda(&one, &x).unwrap();
        close(manifold::lambda(&two, &x).unwrap(), 2.0 * a, 1e-15);
    }
}

#[test]
fn eigen_split_on_omega() {
    for e in [zoo::e1(), zoo::lv_asymmetric(), zoo::neutral_logistic(3, 1.0, 0.0).unwrap()] {
        let k = e.spec.k;
        for rho in e.grid.iter().take(5) {
            let p = manifold::radial_projection(rho).unwrap().rho;
            let n = manifold::effective_density(&e.spec, &p).unwrap();
            let x: Vec<f64> = p.iter().map(|v| v * n).collect();
            let df = DMatrix::from_row_slice(k, k, &fluid::jacobian_df(&e.spec, &x).unwrap());
            let l = manifold::lambda_at(&e.spec, &x).unwrap();
            let scale = df.abs().max();
            let mut eig: Vec<f64> = df.complex_eigenvalues().iter().map(|c| c.re).collect();
            eig.sort_by(f64::total_cmp);
            close(eig[0], l, 1e-8);
            assert!(eig[1..].iter().all(|v| v.abs() <= 1e-8 * scale), "{eig:?}");
            let mut s = vec![0.0; k];
            e.spec.slow_field(&x, &mut s).unwrap();
            let s = DVector::from_vec(s);
            let image = &df * &s;
            let sine = (&image - &s * (l)).norm() / (l.abs() * s.norm());
            assert!(sine <= 1e-8);
        }
    }
}

#[test]
fn dpi_is_a_projection_on_omega() {
    let o = ManifoldOptions::default();
    let lv = zoo::lv_asymmetric();
    for x in [[0.6, 0.8], [0.9, 0.2]] {
        let c = manifold::dpi_dtau(&lv.spec, &x, &o).unwrap();
        assert_eq!(c.tau, 0.0);
        let dpi = DMatrix::from_row_slice(2, 2, &c.dpi);
        let mut s = vec![0.0; 2];
        let mut g = vec![0.0; 2];
        lv.spec.slow_field(&x, &mut s).unwrap();
        lv.spec.grad_r(&x, &mut g).unwrap();
        assert!((&dpi * DVector::from_vec(s)).norm() <= 1e-8);
        let v = DVector::from_vec(vec![-g[1], g[0]]);
        assert!((&dpi * &v - &v).norm() <= 1e-8);
    }
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let o = ManifoldOptions::default();
    let h = 1e-6;
    let lv = zoo::lv_asymmetric();
    for (model, x) in [(zoo::e1().spec, [0.15, 0.4]), (lv.spec.clone(), [0.3, 0.5]), (lv.spec, [1.1, 0.6])] {
        let c = manifold::dpi_dtau(&model, &x, &o).unwrap();
        let scale = c.dpi.iter().chain(&c.dtau).fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let p = manifold::project_and_time(&model, &xp, &o).unwrap();
            let q = manifold::project_and_time(&model, &xm, &o).unwrap();
            close(c.dtau[j], (p.tau - q.tau) / (2.0 * h), 1e-5 * scale);
            for i in 0..2 {
                close(c.dpi[i * 2 + j], (p.pi[i] - q.pi[i]) / (2.0 * h), 1e-5 * scale);
            }
        }
    }
}

#[test]
fn second_derivative_scales_along_rays() {
    let o = ManifoldOptions::default();
    for (e, x) in [(zoo::e1(), vec![0.1, 0.3]), (zoo::neutral_logistic(3, 1.0, 0.0).unwrap(), vec![0.2, 0.1, 0.3])] {
        let (a, da) = manifold::d2pi(&e.spec, &x, &o).unwrap();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let (b, db) = manifold::d2pi(&e.spec, &y, &o).unwrap();
        assert!(da <= 1e-6 && db <= 1e-6);
        let k = x.len();
        for c in 0..k {
            for i in 0..k {
                for j in 0..k {
                    let idx = (c * k + i) * k + j;
                    assert_eq!(a[idx], a[(c * k + j) * k + i]);
                    close(b[idx], a[idx] / 4.0, 1e-5 * a.iter().fold(1.0f64, |m, v| m.max(v.abs())));
                }
            }
        }
    }
}

#[test]
fn tau_decreases_at_rate_r_along_the_flow() {
    let o = ManifoldOptions::default();
    let dt = 1e-4;
    for (model, x) in [(zoo::e1().spec, [0.1, 0.2]), (zoo::lv_asymmetric().spec, [0.2, 1.4])] {
        for t in [0.5, 1.0, 2.0] {
            let at = |s: f64| {
                let y = fluid::flow(&model, &x, s, false, fluid::Direction::Forward, OdeOptions::with_rtol(1e-12))
                    .unwrap()
                    .endpoint;
                (manifold::project_and_time(&model, &y, &o).unwrap().tau, model.r(&y).unwrap())
            };
            let (tp, _) = at(t + dt);
            let (tm, _) = at(t - dt);
            let (_, r) = at(t);
            close((tp - tm) / (2.0 * dt), -r, 1e-6 * r.abs().max(1.0));
            assert!(manifold::psiphi_residual(&model, &x, t, &o).unwrap() <= 1e-6);
        }
        assert!(manifold::rlam2_residual(&model, &x, &o).unwrap() <= 1e-6);
    }
}
