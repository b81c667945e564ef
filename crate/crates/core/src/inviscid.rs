//! Solvers for the inviscid discounted equation `λu + H(x, u') = 0`.
//!
//! For the pendulum the viscosity solution is even about `0` and `π`, and on
//! `[0, π]` it solves the branch ODE `u' = sqrt(2(1 - cos x - λu))` with
//! `u(0) = 0`. For general Tonelli Hamiltonians a monotone Lax–Friedrichs
//! fixed point selects the viscosity solution.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::hamiltonian::HamiltonianModel;
use crate::viscous::SolveReport;

/// Radicands in `[-RADICAND_REJECT, 0)` are roundoff and clamp to zero.
pub const RADICAND_CLAMP: f64 = 1e-12;
/// Radicands below `-RADICAND_REJECT` mean the branch formula is invalid.
pub const RADICAND_REJECT: f64 = 1e-8;

fn pendulum_slope(lambda: f64, x: f64, u: f64) -> Result<f64> {
    let r = 2.0 * (1.0 - x.cos() - lambda * u);
    if r >= 0.0 {
        Ok(r.sqrt())
    } else if r >= -RADICAND_REJECT {
        Ok(0.0)
    } else {
        Err(Error::NegativeRadicand { x, value: r })
    }
}

/// Classical RK4 integration of the pendulum branch ODE on `[0, π]` with step
/// `π / n_half`, evenly reflected onto the `2 n_half`-node torus.
pub fn solve_pendulum_ode(lambda: f64, n_half: usize) -> Result<ScalarField> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let grid = Grid1D::torus(2 * n_half)?;
    let h = grid.h();
    let mut half = Vec::with_capacity(n_half + 1);
    let mut u = 0.0;
    half.push(u);
    for j in 0..n_half {
        let x = j as f64 * h;
        let k1 = pendulum_slope(lambda, x, u)?;
        let k2 = pendulum_slope(lambda, x + 0.5 * h, u + 0.5 * h * k1)?;
        let k3 = pendulum_slope(lambda, x + 0.5 * h, u + 0.5 * h * k2)?;
        let k4 = pendulum_slope(lambda, x + h, u + h * k3)?;
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        half.push(u);
    }
    let mut values = half.clone();
    values.extend(half[1..n_half].iter().rev());
    ScalarField::new(grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dissipation {
    /// Constant artificial viscosity coefficient `σ`.
    #[default]
    Global,
    /// Local wave speed `max(|∂_pH(D⁺u)|, |∂_pH(D⁻u)|)`, capped by `σ`.
    Local,
}

#[derive(Debug, Clone)]
pub struct LaxFriedrichsOptions {
    /// Bound on `|∂_pH|` over the solution's gradients.
    pub sigma: f64,
    /// Stop once `ω ‖G(u)‖_∞ <= tol λ`.
    pub tol: f64,
    pub dissipation: Dissipation,
    pub max_sweeps: usize,
    pub initial_guess: Option<ScalarField>,
}

impl LaxFriedrichsOptions {
    pub fn new(sigma: f64, tol: f64) -> Self {
        Self {
            sigma,
            tol,
            dissipation: Dissipation::Global,
            max_sweeps: 5_000_000,
            initial_guess: None,
        }
    }
}

/// Lax–Friedrichs scheme operator `G_j(u)` at one node.
#[inline]
#[allow(clippy::too_many_arguments)]
fn lf_operator(
    model: &HamiltonianModel,
    x: f64,
    um: f64,
    uj: f64,
    up: f64,
    h: f64,
    lambda: f64,
    sigma: f64,
    dissipation: Dissipation,
) -> f64 {
    let fwd = (up - uj) / h;
    let bwd = (uj - um) / h;
    let s = match dissipation {
        Dissipation::Global => sigma,
        Dissipation::Local => model
            .dhdp(x, fwd)
            .abs()
            .max(model.dhdp(x, bwd).abs())
            .min(sigma),
    };
    lambda * uj + model.h(x, 0.5 * (fwd + bwd)) - 0.5 * s * (fwd - bwd)
}

/// The relaxation weight `h / (σ + λh)`.
pub fn lf_relaxation(sigma: f64, lambda: f64, h: f64) -> f64 {
    h / (sigma + lambda * h)
}

/// One Jacobi update `u_j - ω G_j(u)` of the whole field.
pub fn lax_friedrichs_update(
    model: &HamiltonianModel,
    u: &ScalarField,
    lambda: f64,
    sigma: f64,
    dissipation: Dissipation,
) -> ScalarField {
    let g = *u.grid();
    let w = lf_relaxation(sigma, lambda, g.h());
    let v = u.values();
    let out = (0..g.n())
        .map(|j| {
            v[j] - w * lf_operator(
                model,
                g.x(j),
                v[g.prev(j)],
                v[j],
                v[g.next(j)],
                g.h(),
                lambda,
                sigma,
                dissipation,
            )
        })
        .collect();
    ScalarField::new(g, out).expect("finite update")
}

/// Fixed point of the monotone Lax–Friedrichs update with a constant `σ`.
pub fn solve_discounted_lax_friedrichs(
    model: &HamiltonianModel,
    lambda: f64,
    grid: &Grid1D,
    sigma: f64,
    tol: f64,
) -> Result<(ScalarField, SolveReport)> {
    solve_discounted_lax_friedrichs_with(
        model,
        lambda,
        grid,
        &LaxFriedrichsOptions::new(sigma, tol),
    )
}

/// Fixed point of the Lax–Friedrichs update, iterated with alternating
/// Gauss–Seidel sweeps.
pub fn solve_discounted_lax_friedrichs_with(
    model: &HamiltonianModel,
    lambda: f64,
    grid: &Grid1D,
    opts: &LaxFriedrichsOptions,
) -> Result<(ScalarField, SolveReport)> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(opts.sigma.is_finite() && opts.sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {}",
            opts.sigma
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }
    let n = grid.n();
    let h = grid.h();
    let xs: Vec<f64> = grid.nodes().collect();
    let w = lf_relaxation(opts.sigma, lambda, h);
    let mut u = match &opts.initial_guess {
        Some(g) if g.grid() == grid => g.values().to_vec(),
        Some(g) => {
            return Err(Error::GridMismatch {
                left: n,
                right: g.grid().n(),
            })
        }
        None => vec![0.0; n],
    };
    let op = |u: &[f64], j: usize| {
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let jp = if j + 1 == n { 0 } else { j + 1 };
        lf_operator(
            model,
            xs[j],
            u[jm],
            u[j],
            u[jp],
            h,
            lambda,
            opts.sigma,
            opts.dissipation,
        )
    };
    let update_norm = |u: &[f64]| (0..n).fold(0.0f64, |m, j| m.max((w * op(u, j)).abs()));

    let initial = update_norm(&u);
    let target = opts.tol * lambda;
    let mut norm = initial;
    let mut sweeps = 0;
    while norm > target && sweeps < opts.max_sweeps {
        if sweeps % 2 == 0 {
            for j in 0..n {
                u[j] -= w * op(&u, j);
            }
        } else {
            for j in (0..n).rev() {
                u[j] -= w * op(&u, j);
            }
        }
        sweeps += 1;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { sigma: opts.sigma });
        }
        if sweeps % 2 == 0 {
            norm = update_norm(&u);
            if !norm.is_finite() || norm > 1e6 * (1.0 + initial) {
                return Err(Error::Diverged { sigma: opts.sigma });
            }
        }
    }
    let report = SolveReport {
        iterations: sweeps,
        final_residual_inf: norm,
        converged: norm <= target,
        continuation_steps: 0,
    };
    Ok((ScalarField::new(*grid, u)?, report))
}
