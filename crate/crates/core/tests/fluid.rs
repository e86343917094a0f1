use nalgebra::DMatrix;
use proptest::prelude::*;
use qnpop_core::fluid::{self, Direction, Verdict};
use qnpop_core::model::{scalar, unit_clutch, ClutchRate, DeathRate, ModelSpec};
use qnpop_core::ode::OdeOptions;
use qnpop_core::zoo;

const RTOL: f64 = 1e-10;

fn fwd(model: &ModelSpec, x: &[f64], t: f64) -> Vec<f64> {
    fluid::flow(model, x, t, false, Direction::Forward, OdeOptions::default()).unwrap().endpoint
}

fn fundamental(model: &ModelSpec, x: &[f64], t: f64) -> DMatrix<f64> {
    let m = fluid::flow(model, x, t, true, Direction::Forward, OdeOptions::default()).unwrap().fundamental.unwrap();
    DMatrix::from_row_slice(model.k, model.k, &m)
}

fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1e-300)
}

#[test]
fn e1_jacobian_on_omega() {
    let e1 = zoo::e1();
    let df = fluid::jacobian_df(&e1.spec, &[0.3, 0.7]).unwrap();
    let want = [-0.3, -0.3, -0.7, -0.7];
    for (a, b) in df.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{df:?}");
    }
    let mut eig: Vec<f64> = DMatrix::from_row_slice(2, 2, &df).complex_eigenvalues().iter().map(|c| c.re).collect();
    eig.sort_by(f64::total_cmp);
    assert!((eig[0] + 1.0).abs() < 1e-12 && eig[1].abs() < 1e-12, "{eig:?}");
}

#[test]
fn e1_structure_passes() {
    let e1 = zoo::e1();
    let pts = zoo::box_grid(&e1.spec, 20);
    let rep = fluid::check_structure(&e1.spec, &pts);
    for name in ["competitive", "irreducible", "source_at_origin", "dissipative"] {
        assert_eq!(rep.get(name).unwrap().verdict, Verdict::Pass, "{name}: {}", rep.get(name).unwrap().detail);
    }
    let j0 = fluid::jacobian_df(&e1.spec, &[0.0, 0.0]).unwrap();
    assert_eq!(j0, vec![1.0, 0.0, 0.0, 1.0]);
}

// Type 1 helps type 0: ∂₁(β̄₀ − δ₀) = +1.
fn mutualist() -> ModelSpec {
    ModelSpec::builder("mutualist", 2)
        .clutch(ClutchRate::new(0, unit_clutch(2, 0, 1), scalar(|x| 1.0 + x[1])))
        .clutch(ClutchRate::new(1, unit_clutch(2, 1, 1), scalar(|_| 1.0)))
        .death(DeathRate::new(scalar(|x| x[0])))
        .death(DeathRate::new(scalar(|x| x[0] + x[1])))
        .domain_box(vec![(0.0, 3.0), (0.0, 3.0)])
        .build()
        .unwrap()
}

#[test]
fn positive_interaction_fails_competitiveness() {
    let m = mutualist();
    let pts = vec![vec![0.5, 0.5], vec![1.0, 0.2]];
    let rep = fluid::check_structure(&m, &pts);
    let c = rep.get("competitive").unwrap();
    assert_eq!(c.verdict, Verdict::Fail);
    assert!(pts.contains(c.witness.as_ref().unwrap()));
}

#[test]
fn fundamental_matches_finite_differences() {
    let h = 1e-5;
    let lv = zoo::lv_asymmetric();
    for (model, x) in [(zoo::e1().spec, vec![0.15, 0.35]), (lv.spec.clone(), vec![0.2, 0.9]), (lv.spec, vec![0.7, 0.1])] {
        for t in [0.5, 2.0] {
            let m = fundamental(&model, &x, t);
            let mut fd = DMatrix::zeros(2, 2);
            for j in 0..2 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let (p, q) = (fwd(&model, &xp, t), fwd(&model, &xm, t));
                for i in 0..2 {
                    fd[(i, j)] = (p[i] - q[i]) / (2.0 * h);
                }
            }
            assert!(max_rel(&m, &fd) <= 1e-5, "{}: {m} vs {fd}", model.name);
            assert!(m.determinant() > 0.0);
        }
    }
}

#[test]
fn backward_variational_identity() {
    let lv = zoo::lv_asymmetric();
    for (model, x) in [(zoo::e1().spec, vec![0.2, 0.5]), (lv.spec, vec![0.4, 0.3])] {
        let t = 0.8;
        let r = fluid::phi(&model, &x, t, true, OdeOptions::default()).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &r.fundamental.unwrap());
        let mut s0 = vec![0.0; 2];
        let mut s1 = vec![0.0; 2];
        model.slow_field(&x, &mut s0).unwrap();
        model.slow_field(&r.endpoint, &mut s1).unwrap();
        let pushed = &m * nalgebra::DVector::from_vec(s0);
        for i in 0..2 {
            assert!((pushed[i] - s1[i]).abs() <= 1e-6 * s1[i].abs().max(1e-12), "{}", model.name);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flow_semigroup(x0 in 0.05f64..1.2, x1 in 0.05f64..1.2, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        for model in [zoo::e1().spec, zoo::lv_asymmetric().spec] {
            let direct = fwd(&model, &[x0, x1], s + t);
            let split = fwd(&model, &fwd(&model, &[x0, x1], t), s);
            for (a, b) in direct.iter().zip(&split) {
                prop_assert!((a - b).abs() <= 10.0 * RTOL * a.abs().max(1.0), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn fundamental_chain_rule(x0 in 0.05f64..1.2, x1 in 0.05f64..1.2, s in 0.0f64..1.5, t in 0.0f64..1.5) {
        for model in [zoo::e1().spec, zoo::lv_asymmetric().spec] {
            let x = [x0, x1];
            let whole = fundamental(&model, &x, s + t);
            let chained = fundamental(&model, &fwd(&model, &x, t), s) * fundamental(&model, &x, t);
            let scale = whole.abs().max().max(1.0);
            prop_assert!((whole - chained).abs().max() <= 100.0 * RTOL * scale);
        }
    }
}
