use std::f64::consts::PI;

use hjvisc::adjoint::adjoint_drift;
use hjvisc::*;

fn pendulum_measure(lambda: f64, eps: f64, n: usize, x0: usize) -> (ScalarField, DiscreteMeasure) {
    let g = Grid1D::torus(n).unwrap();
    let m = pendulum_hamiltonian();
    let (u, report) = solve_viscous(&m, lambda, eps, &g, &ViscousOptions::default()).unwrap();
    assert!(report.converged);
    let theta = solve_adjoint_stationary(&m, &u, lambda, eps, x0).unwrap();
    let mu = extract_measure(&m, &u, &theta).unwrap();
    (u, mu)
}

#[test]
fn measure_concentrates_on_the_hyperbolic_point() {
    // source at π, mass must travel to the maximum of the potential at 0
    let lambda = 1e-3;
    let (_, mu) = pendulum_measure(lambda, lambda * lambda, 2048, 1024);
    let near_zero = mu.mass_near(0.0, 1.0);
    assert!(near_zero >= 0.9, "mass near 0: {near_zero}");
    assert!(mu.mass_near(PI, 1.0) < 0.1);
    assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-8);
}

#[test]
fn closedness_defect_is_order_lambda() {
    let eps = 0.05;
    let n = 2048;
    let x0 = n / 4;
    let phi = ScalarField::from_fn(Grid1D::torus(n).unwrap(), f64::sin).unwrap();
    let mut defects = Vec::new();
    for lambda in [1e-2, 1e-3] {
        let (_, mu) = pendulum_measure(lambda, eps, n, x0);
        let defect = closedness_defect(&mu, eps, &phi).unwrap();
        let identity = lambda * (phi[x0] - mu.integrate(|x, _| x.sin()));
        assert!((defect - identity.abs()).abs() <= 1e-5 * lambda + 1e-9);
        assert!(defect <= 2.0 * lambda * phi.sup_norm() + 1e-3);
        assert!(defect <= 3.0 * lambda * phi.sup_norm());
        defects.push(defect);
    }
    let ratio = defects[0] / defects[1];
    assert!((5.0..=20.0).contains(&ratio), "{defects:?}");
}

#[test]
fn ergodic_constant_tends_to_zero_linearly() {
    let g = Grid1D::torus(512).unwrap();
    let lambdas = [1e-2, 5e-3, 2.5e-3];
    let m = pendulum_hamiltonian();
    let cs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&e| estimate_ergodic_constant(&m, e, &lambdas, &g).unwrap())
        .collect();
    assert!(cs.iter().all(|c| *c < 0.0));
    assert!(cs.windows(2).all(|w| w[1].abs() < w[0].abs()));
}

#[test]
fn action_matches_discounted_value_along_sweep() {
    let m = pendulum_hamiltonian();
    for (lambda, eps) in [(0.05, 0.05f64), (0.02, 0.02f64.powf(1.2))] {
        let (u, mu) = pendulum_measure(lambda, eps, 2048, 700);
        let action = measure_action(&mu, &m);
        assert!((action - lambda * u[700]).abs() <= 1e-3 * (lambda * u[700]).abs());
        // the support velocities are the adjoint drift
        let b = adjoint_drift(&m, &u);
        assert!(mu
            .support()
            .iter()
            .enumerate()
            .all(|(j, &(_, v))| v == b[j]));
    }
}
