//! Damped Newton solver for `λu + H(x, u') = ε u''` on the periodic grid and
//! on the half interval `[0, π]` with reflecting ghost nodes.
//!
//! The residual at node `j` is
//!
//! ```text
//! F_j(u) = λ u_j + H(x_j, (u_{j+1} - u_{j-1}) / 2h) - ν_j (u_{j+1} - 2u_j + u_{j-1}) / h²
//! ```
//!
//! with `ν_j = ε` for [`Discretization::Central`]. [`Discretization::PecletLimited`]
//! raises the viscosity to `(h/2) max(|∂_pH(x_j, D⁺u_j)|, |∂_pH(x_j, D⁻u_j)|)`
//! wherever that exceeds `ε`, i.e. wherever the grid does not resolve the
//! viscous layer. On resolved grids the two schemes coincide.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::hamiltonian::HamiltonianModel;
use crate::tridiag::CyclicTridiagonal;

/// Viscosity used for continuation stages starts here (or at `ε` if larger).
pub const CONTINUATION_START: f64 = 0.5;
/// Smallest line-search step before an iteration counts as stalled.
pub const MIN_STEP: f64 = 1.0 / (1 << 20) as f64;
/// Residual tolerance floor for intermediate continuation stages.
const STAGE_TOL: f64 = 1e-7;
/// A solve that fails to halve its residual over this many iterations stalls.
const PROGRESS_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discretization {
    /// Central gradient with the physical viscosity `ε` everywhere.
    Central,
    /// Central gradient with a cell-Péclet viscosity floor.
    #[default]
    PecletLimited,
}

#[derive(Debug, Clone)]
pub struct ViscousOptions {
    pub tol_residual_inf: f64,
    pub max_newton_iters: usize,
    /// Backtracking factor of the line search, in `(0, 1)`.
    pub damping: f64,
    pub continuation: bool,
    pub initial_guess: Option<ScalarField>,
    pub discretization: Discretization,
}

impl Default for ViscousOptions {
    fn default() -> Self {
        Self {
            tol_residual_inf: 1e-10,
            max_newton_iters: 200,
            damping: 0.5,
            continuation: true,
            initial_guess: None,
            discretization: Discretization::default(),
        }
    }
}

impl ViscousOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual_inf > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol_residual_inf must be positive, got {}",
                self.tol_residual_inf
            )));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::InvalidArgument(
                "max_newton_iters must be >= 1".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1), got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_inf: f64,
    pub converged: bool,
    pub continuation_steps: usize,
}

/// Residual and its three partial derivatives at one node.
#[derive(Debug, Clone, Copy)]
struct NodeLinearization {
    value: f64,
    d_prev: f64,
    d_self: f64,
    d_next: f64,
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn node_residual(
    model: &HamiltonianModel,
    x: f64,
    um: f64,
    uj: f64,
    up: f64,
    h: f64,
    lambda: f64,
    eps: f64,
    scheme: Discretization,
) -> NodeLinearization {
    let grad = (up - um) / (2.0 * h);
    let lap = ((up - uj) - (uj - um)) / (h * h);
    let hp = model.dhdp(x, grad);
    let mut nu = eps;
    let (mut dnu_prev, mut dnu_self, mut dnu_next) = (0.0, 0.0, 0.0);
    if scheme == Discretization::PecletLimited {
        let fwd = (up - uj) / h;
        let bwd = (uj - um) / h;
        let speed_fwd = model.dhdp(x, fwd);
        let speed_bwd = model.dhdp(x, bwd);
        if speed_fwd.abs() >= speed_bwd.abs() {
            if 0.5 * h * speed_fwd.abs() > eps {
                nu = 0.5 * h * speed_fwd.abs();
                let s = 0.5 * speed_fwd.signum() * model.d2hdp2(x, fwd);
                dnu_next = s;
                dnu_self = -s;
            }
        } else if 0.5 * h * speed_bwd.abs() > eps {
            nu = 0.5 * h * speed_bwd.abs();
            let s = 0.5 * speed_bwd.signum() * model.d2hdp2(x, bwd);
            dnu_self = s;
            dnu_prev = -s;
        }
    }
    let h2 = h * h;
    NodeLinearization {
        value: lambda * uj + model.h(x, grad) - nu * lap,
        d_prev: -hp / (2.0 * h) - nu / h2 - lap * dnu_prev,
        d_self: lambda + 2.0 * nu / h2 - lap * dnu_self,
        d_next: hp / (2.0 * h) - nu / h2 - lap * dnu_next,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Boundary {
    Periodic,
    /// Ghost nodes `u_{-1} = u_1`, `u_{N+1} = u_{N-1}`.
    Reflecting,
}

/// One discrete viscous problem with `ε` left free for continuation.
struct ViscousProblem<'a> {
    model: &'a HamiltonianModel,
    lambda: f64,
    h: f64,
    xs: Vec<f64>,
    boundary: Boundary,
    scheme: Discretization,
}

impl ViscousProblem<'_> {
    fn neighbours(&self, u: &[f64], j: usize) -> (f64, f64) {
        let n = u.len();
        match self.boundary {
            Boundary::Periodic => (u[(j + n - 1) % n], u[(j + 1) % n]),
            Boundary::Reflecting => {
                let um = if j == 0 { u[1] } else { u[j - 1] };
                let up = if j + 1 == n { u[n - 2] } else { u[j + 1] };
                (um, up)
            }
        }
    }

    /// Linearization at node `j` of the field `u + shift`.
    fn node(&self, u: &[f64], shift: f64, j: usize, eps: f64) -> NodeLinearization {
        let (um, up) = self.neighbours(u, j);
        let mut lin = node_residual(
            self.model,
            self.xs[j],
            um,
            u[j],
            up,
            self.h,
            self.lambda,
            eps,
            self.scheme,
        );
        lin.value += self.lambda * shift;
        lin
    }

    fn residual(&self, u: &[f64], shift: f64, eps: f64) -> Vec<f64> {
        (0..u.len())
            .map(|j| self.node(u, shift, j, eps).value)
            .collect()
    }

    fn residual_norm(&self, u: &[f64], shift: f64, eps: f64) -> f64 {
        (0..u.len()).fold(0.0, |m, j| m.max(self.node(u, shift, j, eps).value.abs()))
    }

    fn jacobian(&self, u: &[f64], eps: f64) -> CyclicTridiagonal {
        let n = u.len();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for j in 0..n {
            let lin = self.node(u, 0.0, j, eps);
            diag[j] = lin.d_self;
            match self.boundary {
                Boundary::Periodic => {
                    sub[j] = lin.d_prev;
                    sup[j] = lin.d_next;
                }
                Boundary::Reflecting => {
                    if j == 0 {
                        sup[j] = lin.d_prev + lin.d_next;
                    } else if j + 1 == n {
                        sub[j] = lin.d_prev + lin.d_next;
                    } else {
                        sub[j] = lin.d_prev;
                        sup[j] = lin.d_next;
                    }
                }
            }
        }
        CyclicTridiagonal { sub, diag, sup }
    }

    /// Newton iteration on `u - mean(u)`, which keeps the difference
    /// quotients free of cancellation when `u` carries a large constant.
    fn newton(&self, u: &mut Vec<f64>, eps: f64, tol: f64, opts: &ViscousOptions) -> NewtonOutcome {
        let shift = u.iter().sum::<f64>() / u.len() as f64;
        let mut v: Vec<f64> = u.iter().map(|a| a - shift).collect();
        let out = self.newton_centered(&mut v, shift, eps, tol, opts);
        *u = v.iter().map(|a| a + shift).collect();
        out
    }

    fn newton_centered(
        &self,
        u: &mut Vec<f64>,
        shift: f64,
        eps: f64,
        tol: f64,
        opts: &ViscousOptions,
    ) -> NewtonOutcome {
        let mut res = self.residual_norm(u, shift, eps);
        let mut history = vec![res];
        let mut iterations = 0;
        while iterations < opts.max_newton_iters {
            if res <= tol {
                return NewtonOutcome {
                    iterations,
                    residual: res,
                    converged: true,
                };
            }
            let rhs: Vec<f64> = self.residual(u, shift, eps).iter().map(|r| -r).collect();
            let step = match self.jacobian(u, eps).solve(&rhs) {
                Ok(s) => s,
                Err(_) => break,
            };
            iterations += 1;
            let mut t = 1.0;
            let mut accepted = false;
            while t >= MIN_STEP {
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a + t * d).collect();
                let r = self.residual_norm(&trial, shift, eps);
                if r < res {
                    *u = trial;
                    res = r;
                    accepted = true;
                    break;
                }
                t *= opts.damping;
            }
            if !accepted {
                break;
            }
            history.push(res);
            if history.len() > PROGRESS_WINDOW
                && res > 0.5 * history[history.len() - 1 - PROGRESS_WINDOW]
            {
                break;
            }
        }
        NewtonOutcome {
            iterations,
            residual: res,
            converged: res <= tol,
        }
    }

    fn solve(&self, mut u: Vec<f64>, eps: f64, opts: &ViscousOptions) -> (Vec<f64>, SolveReport) {
        let start = u.clone();
        let cold = self.newton(&mut u, eps, opts.tol_residual_inf, opts);
        let mut report = SolveReport {
            iterations: cold.iterations,
            final_residual_inf: cold.residual,
            converged: cold.converged,
            continuation_steps: 0,
        };
        if cold.converged || !opts.continuation || eps >= CONTINUATION_START {
            return (u, report);
        }

        let best_cold = (u, cold.residual);
        let mut v = start;
        let mut stage = CONTINUATION_START;
        while stage > eps {
            let out = self.newton(&mut v, stage, opts.tol_residual_inf.max(STAGE_TOL), opts);
            report.iterations += out.iterations;
            report.continuation_steps += 1;
            stage *= 0.5;
        }
        let last = self.newton(&mut v, eps, opts.tol_residual_inf, opts);
        report.iterations += last.iterations;
        report.continuation_steps += 1;
        report.converged = last.converged;
        report.final_residual_inf = last.residual;
        if !last.converged && best_cold.1 < last.residual {
            report.final_residual_inf = best_cold.1;
            return (best_cold.0, report);
        }
        (v, report)
    }
}

struct NewtonOutcome {
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn check_parameters(lambda: f64, eps: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    Ok(())
}

fn periodic_problem<'a>(
    model: &'a HamiltonianModel,
    grid: &Grid1D,
    lambda: f64,
    scheme: Discretization,
) -> ViscousProblem<'a> {
    ViscousProblem {
        model,
        lambda,
        h: grid.h(),
        xs: grid.nodes().collect(),
        boundary: Boundary::Periodic,
        scheme,
    }
}

/// `F_j(u)` of the central scheme.
pub fn viscous_residual(
    model: &HamiltonianModel,
    u: &ScalarField,
    lambda: f64,
    eps: f64,
) -> ScalarField {
    viscous_residual_with(model, u, lambda, eps, Discretization::Central)
}

pub fn viscous_residual_with(
    model: &HamiltonianModel,
    u: &ScalarField,
    lambda: f64,
    eps: f64,
    scheme: Discretization,
) -> ScalarField {
    let p = periodic_problem(model, u.grid(), lambda, scheme);
    ScalarField::new(*u.grid(), p.residual(u.values(), 0.0, eps))
        .expect("residual of a finite field is finite")
}

/// Exact Jacobian `∂F/∂u` of the central scheme.
pub fn viscous_jacobian(
    model: &HamiltonianModel,
    u: &ScalarField,
    lambda: f64,
    eps: f64,
) -> CyclicTridiagonal {
    viscous_jacobian_with(model, u, lambda, eps, Discretization::Central)
}

/// Jacobian of the chosen scheme; for [`Discretization::PecletLimited`] it
/// is the derivative of the active branch of the viscosity floor.
pub fn viscous_jacobian_with(
    model: &HamiltonianModel,
    u: &ScalarField,
    lambda: f64,
    eps: f64,
    scheme: Discretization,
) -> CyclicTridiagonal {
    periodic_problem(model, u.grid(), lambda, scheme).jacobian(u.values(), eps)
}

/// Solves `λu + H(x, u') = εu''` on the periodic grid.
///
/// A non-converged solve is not an error: the best iterate is returned with
/// `report.converged == false`.
pub fn solve_viscous(
    model: &HamiltonianModel,
    lambda: f64,
    eps: f64,
    grid: &Grid1D,
    opts: &ViscousOptions,
) -> Result<(ScalarField, SolveReport)> {
    check_parameters(lambda, eps)?;
    opts.validate()?;
    let u0 = match &opts.initial_guess {
        Some(g) if g.grid() == grid => g.values().to_vec(),
        Some(g) => {
            return Err(Error::GridMismatch {
                left: grid.n(),
                right: g.grid().n(),
            })
        }
        None => vec![0.0; grid.n()],
    };
    let problem = periodic_problem(model, grid, lambda, opts.discretization);
    let (u, report) = problem.solve(u0, eps, opts);
    Ok((ScalarField::new(*grid, u)?, report))
}

/// Solution on the nodes `x_j = jπ/N`, `j = 0..=N`, of the half interval.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfIntervalField {
    h: f64,
    values: Vec<f64>,
}

impl HalfIntervalField {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// `(u_1 - u_{-1}) / 2h` and `(u_{N+1} - u_{N-1}) / 2h` with the ghost
    /// values substituted; zero by construction.
    pub fn boundary_derivatives(&self) -> (f64, f64) {
        let n = self.values.len();
        let ghost_left = self.values[1];
        let ghost_right = self.values[n - 2];
        (
            (self.values[1] - ghost_left) / (2.0 * self.h),
            (ghost_right - self.values[n - 2]) / (2.0 * self.h),
        )
    }

    /// Even reflection onto the `2N`-node torus.
    pub fn to_torus(&self) -> Result<ScalarField> {
        let n_half = self.values.len() - 1;
        let grid = Grid1D::torus(2 * n_half)?;
        let mut v = self.values.clone();
        v.extend(self.values[1..n_half].iter().rev());
        ScalarField::new(grid, v)
    }
}

/// Solves the same residual on `[0, π]` with `u'(0) = u'(π) = 0` imposed by
/// ghost-node reflection. Requires an `x ↦ -x` symmetric Hamiltonian.
pub fn solve_viscous_neumann(
    model: &HamiltonianModel,
    lambda: f64,
    eps: f64,
    n_half: usize,
    opts: &ViscousOptions,
) -> Result<(HalfIntervalField, SolveReport)> {
    check_parameters(lambda, eps)?;
    opts.validate()?;
    if n_half < crate::grid::MIN_CELLS / 2 {
        return Err(Error::InvalidGrid(format!(
            "n_half = {n_half} is too small"
        )));
    }
    let asym = model.reflection_asymmetry(64, 4.0);
    if asym > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "model `{}` is not reflection symmetric (defect {asym:.3e})",
            model.name()
        )));
    }
    let h = std::f64::consts::PI / n_half as f64;
    let problem = ViscousProblem {
        model,
        lambda,
        h,
        xs: (0..=n_half).map(|j| j as f64 * h).collect(),
        boundary: Boundary::Reflecting,
        scheme: opts.discretization,
    };
    let u0 = match &opts.initial_guess {
        Some(g) if g.len() == n_half + 1 => g.values().to_vec(),
        Some(g) => {
            return Err(Error::GridMismatch {
                left: n_half + 1,
                right: g.len(),
            })
        }
        None => vec![0.0; n_half + 1],
    };
    let (values, report) = problem.solve(u0, eps, opts);
    Ok((HalfIntervalField { h, values }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{flat_hamiltonian, pendulum_hamiltonian};
    use crate::stencil::discrete_laplacian;

    #[test]
    fn residual_examples() {
        let g = Grid1D::torus(64).unwrap();
        let zero = ScalarField::zeros(g);
        let r = viscous_residual(&pendulum_hamiltonian(), &zero, 0.1, 0.05);
        for (j, x) in g.nodes().enumerate() {
            assert!((r[j] - (x.cos() - 1.0)).abs() < 1e-15);
        }
        let r = viscous_residual(&flat_hamiltonian(), &zero, 0.1, 0.05);
        assert!(r.values().iter().all(|&v| v == 0.0));
        let c = ScalarField::constant(g, 2.5);
        let r = viscous_residual(&pendulum_hamiltonian(), &c, 0.1, 0.05);
        for (j, x) in g.nodes().enumerate() {
            assert!((r[j] - (0.25 + x.cos() - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_jacobian_bands() {
        let g = Grid1D::torus(32).unwrap();
        let (lambda, eps) = (0.2, 0.03);
        let h2 = g.h() * g.h();
        for scheme in [Discretization::Central, Discretization::PecletLimited] {
            let m = viscous_jacobian_with(
                &flat_hamiltonian(),
                &ScalarField::zeros(g),
                lambda,
                eps,
                scheme,
            );
            for j in 0..32 {
                assert!((m.sub[j] + eps / h2).abs() < 1e-9);
                assert!((m.sup[j] + eps / h2).abs() < 1e-9);
                assert!((m.diag[j] - (lambda + 2.0 * eps / h2)).abs() < 1e-9);
            }
            for s in m.row_sums() {
                assert!((s - lambda).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = Grid1D::torus(32).unwrap();
        let m = flat_hamiltonian();
        let o = ViscousOptions::default();
        assert!(solve_viscous(&m, 0.0, 0.1, &g, &o).is_err());
        assert!(solve_viscous(&m, 0.1, -1.0, &g, &o).is_err());
        let bad = ViscousOptions {
            damping: 1.0,
            ..ViscousOptions::default()
        };
        assert!(solve_viscous(&m, 0.1, 0.1, &g, &bad).is_err());
    }

    #[test]
    fn flat_model_gives_zero() {
        let g = Grid1D::torus(64).unwrap();
        let (u, rep) = solve_viscous(
            &flat_hamiltonian(),
            0.3,
            0.01,
            &g,
            &ViscousOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert_eq!(u.sup_norm(), 0.0);
        let (v, rep) = solve_viscous_neumann(
            &flat_hamiltonian(),
            0.3,
            0.01,
            32,
            &ViscousOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pendulum_zero_point_identity() {
        let lambda: f64 = 0.1;
        let eps = lambda.powf(1.2);
        let g = Grid1D::torus(1024).unwrap();
        let opts = ViscousOptions::default();
        let (u, rep) = solve_viscous(&pendulum_hamiltonian(), lambda, eps, &g, &opts).unwrap();
        assert!(rep.converged);
        assert!(rep.final_residual_inf <= opts.tol_residual_inf);
        let lap = discrete_laplacian(&u);
        assert!((lambda * u[0] - eps * lap[0]).abs() <= opts.tol_residual_inf + g.h() * g.h());
        // reflection symmetry u(x) = u(2π - x)
        for j in 1..1024 {
            assert!((u[j] - u[1024 - j]).abs() <= 10.0 * opts.tol_residual_inf);
        }
    }

    #[test]
    fn neumann_ghost_derivatives_vanish() {
        let lambda: f64 = 0.1;
        let (u, rep) = solve_viscous_neumann(
            &pendulum_hamiltonian(),
            lambda,
            lambda.powf(1.2),
            64,
            &ViscousOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert_eq!(u.boundary_derivatives(), (0.0, 0.0));
        assert_eq!(u.to_torus().unwrap().len(), 128);
    }
}
