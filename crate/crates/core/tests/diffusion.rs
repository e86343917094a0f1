use qnpop_core::diffusion::{self, GeneratorCoefficients, Observable};
use qnpop_core::model::{scalar, unit_clutch, vector, ClutchRate, DeathRate, ModelSpec, QuasiNeutral};
use qnpop_core::rng;
use qnpop_core::stats;
use qnpop_core::zoo;

#[test]
fn e1_hand_values() {
    let e1 = zoo::e1();
    let g = diffusion::generator_coefficients(&e1.spec, &[0.5, 0.5]).unwrap();
    assert_eq!(g.drift[0], g.drift[1]);
    assert_eq!(g.lambda, -1.0);
    assert!(g.normal_drift.abs() < 1e-15);
    assert!(g.normal_diffusion.abs() < 1e-15);
    // Leading diagonal term π_i(β̌_i + β̄_i) = 2π_i on the N-clock.
    let g = diffusion::generator_coefficients(&e1.spec, &[0.3, 0.7]).unwrap();
    let lead = [0.6, 1.4];
    let corr = [2.0 * 0.3 * 0.3, 2.0 * 0.7 * 0.7];
    for i in 0..2 {
        assert!((g.diffusion[i * 3] / g.time_scale - (lead[i] - corr[i])).abs() < 1e-14);
    }
}

#[test]
fn mutation_terms_at_symmetric_point() {
    let e = zoo::neutral_logistic(2, 1.0, 0.7).unwrap();
    let g = diffusion::generator_coefficients(&e.spec, &[0.5, 0.5]).unwrap();
    for i in 0..2 {
        assert!(g.terms.mutation_direct[i].abs() < 1e-15);
        assert!(g.drift[i].abs() < 1e-15);
    }
    // Near a vertex the mutation inflow dominates the breakdown.
    let g = diffusion::generator_coefficients(&e.spec, &[0.01, 0.99]).unwrap();
    assert!(g.terms.mutation_direct[0] > 10.0 * g.terms.qv_drift[0].abs());
    assert!(g.drift[0] > 0.0);
}

#[test]
fn selection_cancels_in_frequencies_when_gamma_and_sigma_are_equal() {
    let e = zoo::neutral_logistic(3, 1.3, 0.4).unwrap();
    let pi = [0.2, 0.3, 0.5];
    let g = diffusion::generator_coefficients(&e.spec, &pi).unwrap();
    let sel: Vec<f64> = (0..3).map(|i| g.terms.selection_direct[i] + g.terms.selection_projection[i]).collect();
    let only_selection = GeneratorCoefficients { drift: sel, diffusion: vec![0.0; 9], ..g.clone() };
    let f = diffusion::pushforward_frequency(&e.spec, &only_selection).unwrap();
    assert!(f.drift.iter().all(|v| v.abs() < 1e-10), "{:?}", f.drift);
}

#[test]
fn frequency_coefficients_on_e1() {
    let e1 = zoo::e1();
    let mut pts = Vec::new();
    for i in 1..10 {
        let p = f64::from(i) / 10.0;
        let g = diffusion::generator_coefficients(&e1.spec, &[p, 1.0 - p]).unwrap();
        let f = diffusion::pushforward_frequency(&e1.spec, &g).unwrap();
        assert!(f.drift[0].abs() < 1e-14);
        pts.push((p * (1.0 - p), f.diffusion[0]));
    }
    let (c, r2) = stats::proportional_fit(&pts);
    assert!((c - 1.0).abs() < 1e-12 && r2 > 0.999_999);
    // At a vertex the second row and column vanish.
    let g = diffusion::generator_coefficients(&e1.spec, &[1.0, 0.0]).unwrap();
    let f = diffusion::pushforward_frequency(&e1.spec, &g).unwrap();
    assert_eq!(f.diffusion[1], 0.0);
    assert_eq!(f.diffusion[2], 0.0);
    assert_eq!(f.diffusion[3], 0.0);
}

#[test]
fn zero_rate_model_has_zero_moments() {
    let k = 2;
    let spec = ModelSpec::builder("inert", k)
        .clutch(ClutchRate::new(0, unit_clutch(k, 0, 1), scalar(|_| 0.0)))
        .death(DeathRate::new(scalar(|_| 0.0)))
        .death(DeathRate::new(scalar(|_| 0.0)))
        .quasi_neutral(QuasiNeutral {
            gamma: vector(|_, o| o.fill(1.0)),
            r: scalar(|x| 1.0 - x[0] - x[1]),
            grad_r: None,
            jac_gamma: None,
        })
        .build()
        .unwrap();
    let est = diffusion::jump_moment_oracle(&spec, &[0.4, 0.6], 100, 10, 0.05, 3, Observable::Projection).unwrap();
    assert!(est.plain.drift.iter().chain(&est.plain.diffusion).all(|v| *v == 0.0));
    assert!(est.richardson.drift.iter().chain(&est.richardson.diffusion).all(|v| *v == 0.0));
    assert_eq!(est.events, 0);
}

#[test]
fn oracle_is_reproducible() {
    let e1 = zoo::e1();
    let a = diffusion::jump_moment_oracle(&e1.spec, &[0.5, 0.5], 200, 20, 0.05, 9, Observable::Frequency).unwrap();
    let b = diffusion::jump_moment_oracle(&e1.spec, &[0.5, 0.5], 200, 20, 0.05, 9, Observable::Frequency).unwrap();
    assert_eq!(a, b);
    assert!(a.richardson.drift_se[0] > 0.0);
}

#[test]
fn diffusion_paths_stay_on_omega_and_frequency_is_a_martingale() {
    let e1 = zoo::e1();
    let p0 = 0.3;
    let paths = 1000;
    let mut finals = Vec::with_capacity(paths);
    let mut absorbed = 0;
    for r in 0..paths {
        let mut g = rng::replica_rng(5, r as u64);
        let path = diffusion::simulate_diffusion_with(&e1.spec, &[p0, 1.0 - p0], 0.5, 0.01, &mut g, 5).unwrap();
        for p in &path.points {
            assert!(e1.spec.r(p).unwrap().abs() <= 1e-6);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
        absorbed += usize::from(!path.absorptions.is_empty());
        let last = path.points.last().unwrap();
        finals.push(last[0] / (last[0] + last[1]));
    }
    let m = stats::mean(&finals);
    let se = stats::std_error(&finals);
    assert!((m - p0).abs() <= 3.0 * se, "mean {m} vs {p0} (se {se})");
    // Var p(t) = p0(1-p0)(1 - e^{-t}) for the neutral Wright–Fisher diffusion.
    let v = stats::variance(&finals);
    let want = p0 * (1.0 - p0) * (1.0 - (-0.5f64).exp());
    assert!((v - want).abs() < 0.15 * want, "variance {v} vs {want}");
    assert!(absorbed > 0);
}

#[test]
fn constant_path_without_noise() {
    let k = 2;
    let spec = ModelSpec::builder("inert", k)
        .clutch(ClutchRate::new(0, unit_clutch(k, 0, 1), scalar(|_| 0.0)))
        .death(DeathRate::new(scalar(|_| 0.0)))
        .death(DeathRate::new(scalar(|_| 0.0)))
        .quasi_neutral(QuasiNeutral {
            gamma: vector(|_, o| o.fill(1.0)),
            r: scalar(|x| 1.0 - x[0] - x[1]),
            grad_r: None,
            jac_gamma: None,
        })
        .build()
        .unwrap();
    let path = diffusion::simulate_diffusion(&spec, &[0.25, 0.75], 0.1, 0.01, 1).unwrap();
    assert_eq!(path.points.len(), 11);
    assert!(path.points.iter().all(|p| p == &path.points[0]));
}
