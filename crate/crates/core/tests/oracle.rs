use qnpop_core::diffusion::{self, Observable};
use qnpop_core::manifold;
use qnpop_core::zoo::{self, ZooEntry};

fn check(e: &ZooEntry, rho: &[f64], n: u64, replicas: usize, seed: u64, zmax: f64) {
    let ne = manifold::effective_density(&e.spec, rho).unwrap();
    let target: Vec<f64> = rho.iter().map(|v| v * ne).collect();
    let est = diffusion::jump_moment_oracle(&e.spec, &target, n, replicas, 0.05, seed, Observable::Projection).unwrap();
    let g = diffusion::generator_coefficients(&e.spec, &est.pi0).unwrap();
    let (zb, za) = diffusion::z_scores(&est.richardson, &g.drift, &g.diffusion);
    println!("{} at {:?}: b {:?} vs {:?}; a {:?} vs {:?}; z {zb:?} {za:?}", e.spec.name, est.pi0, est.richardson.drift, g.drift, est.richardson.diffusion, g.diffusion);
    for z in zb.iter().chain(&za) {
        assert!(z.abs() <= zmax, "{}: z = {z}", e.spec.name);
    }
}

#[test]
fn oracle_agrees_with_generator_on_e1_with_mutation() {
    let e = zoo::neutral_logistic(2, 1.0, 1.0).unwrap();
    check(&e, &[0.2, 0.8], 1000, 4000, 11, 4.0);
}

#[test]
fn oracle_agrees_with_generator_on_asymmetric_lv() {
    let e = zoo::lv_asymmetric();
    check(&e, &[0.4, 0.6], 1000, 4000, 12, 4.0);
}
