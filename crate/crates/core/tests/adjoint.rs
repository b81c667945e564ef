use hjvisc::adjoint::{adjoint_drift, entropy_diagnostic, evolve_fokker_planck};
use hjvisc::harness::uniformity_factor;
use hjvisc::*;

#[test]
fn entropy_stays_within_logarithmic_bound() {
    let g = Grid1D::torus(512).unwrap();
    let m = pendulum_hamiltonian();
    let lambda = 0.05;
    let times = [0.1, 1.0, 10.0];
    let mut ratios = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let (u, _) = solve_viscous(&m, lambda, eps, &g, &ViscousOptions::default()).unwrap();
        let drift = adjoint_drift(&m, &u);
        let snaps: Vec<_> = evolve_fokker_planck(&drift, eps, 256, 10.0, 0.01)
            .unwrap()
            .map(|s| s.unwrap())
            .collect();
        for &t in &times {
            let snap = snaps.iter().find(|s| (s.time - t).abs() < 1e-9).unwrap();
            let e = entropy_diagnostic(&snap.density);
            ratios.push(e / (1.0 + eps.ln().abs() + t.ln().abs()));
        }
    }
    let c1 = ratios.iter().copied().fold(0.0, f64::max);
    assert!(c1.is_finite() && c1 <= 0.5, "{ratios:?}");
    assert!(uniformity_factor(&ratios) <= 8.0, "{ratios:?}");
}

#[test]
fn stationary_density_of_pendulum_is_positive() {
    let g = Grid1D::torus(2048).unwrap();
    let m = pendulum_hamiltonian();
    let (u, _) = solve_viscous(&m, 0.01, 0.01, &g, &ViscousOptions::default()).unwrap();
    for x0 in [0, 512, 1024] {
        let theta = solve_adjoint_stationary(&m, &u, 0.01, 0.01, x0).unwrap();
        assert!((theta.mass() - 1.0).abs() < 1e-8);
        assert!(theta.min() >= -1e-12);
        assert!((theta.renormalization() - 1.0).abs() < 1e-6);
    }
}
