//! Sup-convolution `u_δ(x) = max_y (u(y) - d(x, y)² / (2δ))` with the
//! periodic distance `d`, and the approximate-subsolution defect of `u_δ`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::hamiltonian::HamiltonianModel;
use crate::stencil::central_gradient;

/// Brute-force sup-convolution over all grid nodes.
pub fn sup_convolution(u: &ScalarField, delta: f64) -> Result<ScalarField> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let g = *u.grid();
    let v = u.values();
    let out = (0..g.n())
        .into_par_iter()
        .map(|j| {
            v.iter().enumerate().fold(f64::NEG_INFINITY, |m, (k, &uk)| {
                let d = g.node_distance(j, k);
                m.max(uk - d * d / (2.0 * delta))
            })
        })
        .collect();
    ScalarField::new(g, out)
}

/// `max_j (λ u_j + H(x_j, Du_j))⁺` with central differences.
pub fn subsolution_defect(u_delta: &ScalarField, lambda: f64, model: &HamiltonianModel) -> f64 {
    let g = u_delta.grid();
    let du = central_gradient(u_delta);
    (0..g.n())
        .map(|j| lambda * u_delta[j] + model.h(g.x(j), du[j]))
        .fold(0.0, f64::max)
}
