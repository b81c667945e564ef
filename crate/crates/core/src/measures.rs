//! Ergodic constants `c(ε)` and discrete ε-Mather measures.
//!
//! With `c(H)` known, `c(ε) = c(H) - lim_{λ→0} λ u_λ^ε(x0)`, and the discounted
//! measure `μ = (id, ∂_pH(x, Du)) # θ` satisfies
//! `∫ L dμ = λ u(x0) = λ ω(x0) - (c(ε) - c(H))` with `ω = u + (c(ε) - c(H))/λ`.

use rayon::prelude::*;

use crate::adjoint::DensityField;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::hamiltonian::HamiltonianModel;
use crate::stencil::{central_gradient, discrete_laplacian};
use crate::viscous::{solve_viscous, ViscousOptions};

/// Node used for `λ u(x0)` in ergodic-constant estimates.
pub const ERGODIC_NODE: usize = 0;

/// Weighted points `(x, v)` in phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Grid1D,
    support: Vec<(f64, f64)>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Support positions must be the nodes of `grid`, in order.
    pub fn new(grid: Grid1D, velocities: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if velocities.len() != grid.n() || weights.len() != grid.n() {
            return Err(Error::GridMismatch {
                left: grid.n(),
                right: velocities.len().max(weights.len()),
            });
        }
        if let Some(index) = velocities
            .iter()
            .chain(&weights)
            .position(|v| !v.is_finite())
        {
            return Err(Error::NonFinite {
                index: index % grid.n(),
            });
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| **w < -1e-12) {
            return Err(Error::NegativeDensity { index, value });
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::Mass { mass });
        }
        let support = grid.nodes().zip(velocities).collect();
        Ok(Self {
            grid,
            support,
            weights,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w φ(x, v)`.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&(x, v), w)| w * f(x, v))
            .sum()
    }

    /// Mass carried by nodes within periodic distance `r` of `x`.
    pub fn mass_near(&self, x: f64, r: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .filter(|((y, _), _)| self.grid.periodic_distance(x, *y) <= r)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Pushes `θ` forward to phase space along `v = ∂_pH(x, Du)`.
pub fn extract_measure(
    model: &HamiltonianModel,
    u: &ScalarField,
    theta: &DensityField,
) -> Result<DiscreteMeasure> {
    let grid = *u.grid();
    if theta.grid() != &grid {
        return Err(Error::GridMismatch {
            left: grid.n(),
            right: theta.grid().n(),
        });
    }
    let du = central_gradient(u);
    let velocities = (0..grid.n())
        .map(|j| model.dhdp(grid.x(j), du[j]))
        .collect();
    let raw: Vec<f64> = theta.values().iter().map(|t| grid.h() * t).collect();
    let total: f64 = raw.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Mass { mass: total });
    }
    let weights = raw.iter().map(|w| w / total).collect();
    DiscreteMeasure::new(grid, velocities, weights)
}

/// `Σ w L(x, v)`.
pub fn measure_action(mu: &DiscreteMeasure, model: &HamiltonianModel) -> f64 {
    mu.integrate(|x, v| model.lagrangian(x, v))
}

/// `|Σ w (v Dφ(x) - ε Δ_h φ(x))|` for a test function sampled on the
/// measure's grid.
pub fn closedness_defect(mu: &DiscreteMeasure, epsilon: f64, test_fn: &ScalarField) -> Result<f64> {
    if test_fn.grid() != mu.grid() {
        return Err(Error::GridMismatch {
            left: mu.grid().n(),
            right: test_fn.grid().n(),
        });
    }
    let dphi = central_gradient(test_fn);
    let lap = discrete_laplacian(test_fn);
    let sum: f64 = mu
        .support
        .iter()
        .zip(&mu.weights)
        .enumerate()
        .map(|(j, (&(_, v), w))| w * (v * dphi[j] - epsilon * lap[j]))
        .sum();
    Ok(sum.abs())
}

/// Value at `0` of the polynomial through `(xs[i], ys[i])`, by Neville's scheme.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::InvalidArgument(
            "extrapolation needs matching, nonempty samples".into(),
        ));
    }
    let mut p = ys.to_vec();
    for level in 1..xs.len() {
        for i in 0..xs.len() - level {
            let (a, b) = (xs[i], xs[i + level]);
            if a == b {
                return Err(Error::InvalidArgument(format!("repeated abscissa {a}")));
            }
            p[i] = (b * p[i] - a * p[i + 1]) / (b - a);
        }
    }
    Ok(p[0])
}

/// `λ u_λ^ε(x0)` for each `λ`, solved concurrently.
pub fn discounted_values(
    model: &HamiltonianModel,
    epsilon: f64,
    lambdas: &[f64],
    grid: &Grid1D,
    opts: &ViscousOptions,
) -> Result<Vec<f64>> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let (u, report) = solve_viscous(model, lambda, epsilon, grid, opts)?;
            if !report.converged {
                return Err(Error::NotConverged {
                    residual: report.final_residual_inf,
                    iterations: report.iterations,
                });
            }
            Ok(lambda * u[ERGODIC_NODE])
        })
        .collect()
}

/// Estimates `c(ε)` from viscous solves along a decreasing `λ` sequence.
pub fn estimate_ergodic_constant(
    model: &HamiltonianModel,
    epsilon: f64,
    lambdas: &[f64],
    grid: &Grid1D,
) -> Result<f64> {
    estimate_ergodic_constant_with(model, epsilon, lambdas, grid, &ViscousOptions::default())
}

pub fn estimate_ergodic_constant_with(
    model: &HamiltonianModel,
    epsilon: f64,
    lambdas: &[f64],
    grid: &Grid1D,
    opts: &ViscousOptions,
) -> Result<f64> {
    let c_h = model
        .critical_value()
        .ok_or_else(|| Error::UnknownCriticalValue(model.name().to_string()))?;
    if lambdas.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 lambda values, got {}",
            lambdas.len()
        )));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(
            "lambda sequence must be strictly decreasing".into(),
        ));
    }
    let values = discounted_values(model, epsilon, lambdas, grid, opts)?;
    Ok(c_h - extrapolate_to_zero(lambdas, &values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::solve_adjoint_stationary;
    use crate::hamiltonian::{convex_hamiltonian, flat_hamiltonian, pendulum_hamiltonian};
    use std::f64::consts::PI;

    #[test]
    fn measure_validation() {
        let g = Grid1D::torus(8).unwrap();
        assert!(DiscreteMeasure::new(g, vec![0.0; 8], vec![0.125; 8]).is_ok());
        assert!(matches!(
            DiscreteMeasure::new(g, vec![0.0; 8], vec![0.1; 8]),
            Err(Error::Mass { .. })
        ));
        let mut w = vec![0.125; 8];
        w[0] = -0.01;
        w[1] = 0.26;
        assert!(matches!(
            DiscreteMeasure::new(g, vec![0.0; 8], w),
            Err(Error::NegativeDensity { .. })
        ));
        assert!(DiscreteMeasure::new(g, vec![0.0; 7], vec![0.125; 8]).is_err());
    }

    #[test]
    fn neville_recovers_polynomials() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 3.0 - 2.0 * x + 5.0 * x * x - x * x * x)
            .collect();
        assert!((extrapolate_to_zero(&xs, &ys).unwrap() - 3.0).abs() < 1e-12);
        assert!(extrapolate_to_zero(&[0.1, 0.1], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn flat_model_measure() {
        let g = Grid1D::torus(64).unwrap();
        let m = flat_hamiltonian();
        let u = ScalarField::zeros(g);
        let theta = solve_adjoint_stationary(&m, &u, 0.1, 0.2, 10).unwrap();
        let mu = extract_measure(&m, &u, &theta).unwrap();
        assert!(mu.support().iter().all(|&(_, v)| v == 0.0));
        assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert_eq!(measure_action(&mu, &m), 0.0);
        let one = ScalarField::constant(g, 2.5);
        assert_eq!(closedness_defect(&mu, 0.2, &one).unwrap(), 0.0);
    }

    #[test]
    fn flat_ergodic_constant_vanishes() {
        let g = Grid1D::torus(64).unwrap();
        let c =
            estimate_ergodic_constant(&flat_hamiltonian(), 0.1, &[1e-2, 5e-3, 2.5e-3], &g).unwrap();
        assert!(c.abs() < 1e-8);
    }

    #[test]
    fn ergodic_requires_critical_value() {
        let g = Grid1D::torus(32).unwrap();
        let unknown = convex_hamiltonian("quad", |_, p| 0.5 * p * p, |_, p| p, |_, _| 1.0);
        assert!(matches!(
            estimate_ergodic_constant(&unknown, 0.1, &[1e-2, 5e-3, 2.5e-3], &g),
            Err(Error::UnknownCriticalValue(_))
        ));
        assert!(estimate_ergodic_constant(&flat_hamiltonian(), 0.1, &[1e-2, 5e-3], &g).is_err());
        assert!(
            estimate_ergodic_constant(&flat_hamiltonian(), 0.1, &[1e-2, 2e-2, 5e-3], &g).is_err()
        );
    }

    #[test]
    fn pendulum_identities_on_a_coarse_grid() {
        let g = Grid1D::torus(512).unwrap();
        let m = pendulum_hamiltonian();
        let (lambda, eps) = (0.05, 0.1);
        let (u, _) = solve_viscous(&m, lambda, eps, &g, &ViscousOptions::default()).unwrap();
        let x0 = 256;
        let theta = solve_adjoint_stationary(&m, &u, lambda, eps, x0).unwrap();
        let mu = extract_measure(&m, &u, &theta).unwrap();
        let action = measure_action(&mu, &m);
        assert!((action - lambda * u[x0]).abs() < 1e-3 * (lambda * u[x0]).abs());
        let phi = ScalarField::from_fn(g, f64::sin).unwrap();
        let defect = closedness_defect(&mu, eps, &phi).unwrap();
        let expected = (lambda * phi[x0] - lambda * mu.integrate(|x, _| x.sin())).abs();
        assert!((defect - expected).abs() < 1e-4);
        assert!(defect <= 2.0 * lambda + 1e-3);
        assert!(mu.mass_near(0.0, PI) > 0.5);
    }
}
