//! Second-order periodic difference stencils.

use crate::grid::ScalarField;

/// `(u_{j+1} - u_{j-1}) / 2h` with periodic wrap.
pub fn central_gradient(u: &ScalarField) -> ScalarField {
    map_neighbours(u, |um, _, up, h| (up - um) / (2.0 * h))
}

/// `(u_{j+1} - 2u_j + u_{j-1}) / h^2` with periodic wrap.
pub fn discrete_laplacian(u: &ScalarField) -> ScalarField {
    map_neighbours(u, |um, uj, up, h| ((up - uj) - (uj - um)) / (h * h))
}

/// Unnormalised second difference `u_{j+1} - 2u_j + u_{j-1}`.
pub fn second_difference(u: &ScalarField) -> ScalarField {
    map_neighbours(u, |um, uj, up, _| (up - uj) - (uj - um))
}

fn map_neighbours(u: &ScalarField, f: impl Fn(f64, f64, f64, f64) -> f64) -> ScalarField {
    let grid = *u.grid();
    let v = u.values();
    let h = grid.h();
    let out = (0..grid.n())
        .map(|j| f(v[grid.prev(j)], v[j], v[grid.next(j)], h))
        .collect();
    ScalarField::new(grid, out).expect("stencil of a finite field is finite")
}
