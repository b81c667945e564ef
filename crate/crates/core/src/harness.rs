//! Vanishing-viscosity rate sweeps with `ε = λ^{1+α}`, the two-sided bound
//! checks, log-log fits and CSV output.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::hamiltonian::HamiltonianModel;
use crate::inviscid::{
    solve_discounted_lax_friedrichs_with, solve_pendulum_ode, Dissipation, LaxFriedrichsOptions,
};
use crate::stencil::{central_gradient, discrete_laplacian};
use crate::viscous::{solve_viscous, ViscousOptions};

pub const CSV_HEADER: &str = "lambda,epsilon,sup_diff,diff_at_zero,c_delta_ratio,newton_iters";
/// Environment variable capping the number of concurrent sweep points.
pub const THREADS_ENV: &str = "HJVISC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub lambda: f64,
    pub epsilon: f64,
    /// `‖u^ε - u‖_∞`.
    pub sup_diff: f64,
    /// `|u^ε(0) - u(0)|`.
    pub diff_at_zero: f64,
    /// `max(u^ε - u) λ / ε`.
    pub c_delta_ratio: f64,
    pub newton_iters: usize,
    /// `max(u^ε - u)`, signed.
    pub gap_plus: f64,
    /// `max(u - u^ε)`, signed.
    pub gap_minus: f64,
    /// `|λ u^ε(0) - ε Δ_h u^ε(0)|`.
    pub zero_point_residual: f64,
    /// `max |Du^ε|`.
    pub lipschitz: f64,
    /// `max Δ_h u^ε`.
    pub max_laplacian: f64,
    pub grid_step: f64,
    pub newton_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub lambda: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
    pub alpha: f64,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InviscidMethod {
    /// Pendulum ODE for the model named `pendulum`, Lax–Friedrichs otherwise.
    #[default]
    Auto,
    PendulumOde,
    LaxFriedrichs,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub viscous: ViscousOptions,
    pub inviscid: InviscidMethod,
    /// Lax–Friedrichs stopping tolerance.
    pub lf_tol: f64,
    /// Worker threads; `None` reads `HJVISC_THREADS`, then uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            viscous: ViscousOptions::default(),
            inviscid: InviscidMethod::Auto,
            lf_tol: 1e-9,
            threads: None,
        }
    }
}

/// Ten logarithmically spaced values from `1e-1` down to `1e-3`.
pub fn default_lambdas() -> Vec<f64> {
    logspace(1e-1, 1e-3, 10)
}

/// `count` geometrically spaced values from `start` to `end`, both included.
pub fn logspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let (a, b) = (start.log10(), end.log10());
    (0..count)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect()
}

fn thread_count(requested: Option<usize>) -> Option<usize> {
    requested.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&k| k > 0)
    })
}

fn uses_pendulum_ode(model: &HamiltonianModel, opts: &SweepOptions) -> bool {
    match opts.inviscid {
        InviscidMethod::Auto => model.name() == "pendulum",
        InviscidMethod::PendulumOde => true,
        InviscidMethod::LaxFriedrichs => false,
    }
}

fn inviscid_solution(
    model: &HamiltonianModel,
    lambda: f64,
    grid: &Grid1D,
    u_eps: &ScalarField,
    opts: &SweepOptions,
) -> Result<ScalarField> {
    if uses_pendulum_ode(model, opts) {
        if !grid.n().is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "the pendulum ODE needs an even n, got {}",
                grid.n()
            )));
        }
        return solve_pendulum_ode(lambda, grid.n() / 2);
    }
    let du = central_gradient(u_eps);
    let speed = (0..grid.n()).fold(0.0f64, |m, j| m.max(model.dhdp(grid.x(j), du[j]).abs()));
    let lf = LaxFriedrichsOptions {
        dissipation: Dissipation::Local,
        ..LaxFriedrichsOptions::new(1.5 * speed + 0.1, opts.lf_tol)
    };
    let (u, report) = solve_discounted_lax_friedrichs_with(model, lambda, grid, &lf)?;
    if !report.converged {
        return Err(Error::NotConverged {
            residual: report.final_residual_inf,
            iterations: report.iterations,
        });
    }
    Ok(u)
}

/// Solves the viscous and inviscid problems at one `λ` and compares them.
pub fn sweep_point(
    model: &HamiltonianModel,
    alpha: f64,
    lambda: f64,
    grid: &Grid1D,
    opts: &SweepOptions,
) -> Result<SweepRecord> {
    let epsilon = lambda.powf(1.0 + alpha);
    let (u_eps, report) = solve_viscous(model, lambda, epsilon, grid, &opts.viscous)?;
    if !report.converged {
        return Err(Error::NotConverged {
            residual: report.final_residual_inf,
            iterations: report.iterations,
        });
    }
    let u = inviscid_solution(model, lambda, grid, &u_eps, opts)?;
    let diff: Vec<f64> = u_eps
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, b)| a - b)
        .collect();
    let gap_plus = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap_minus = -diff.iter().copied().fold(f64::INFINITY, f64::min);
    let lap = discrete_laplacian(&u_eps);
    let du = central_gradient(&u_eps);
    Ok(SweepRecord {
        lambda,
        epsilon,
        sup_diff: gap_plus.max(gap_minus).max(0.0),
        diff_at_zero: diff[0].abs(),
        c_delta_ratio: gap_plus * lambda / epsilon,
        newton_iters: report.iterations,
        gap_plus,
        gap_minus,
        zero_point_residual: (lambda * u_eps[0] - epsilon * lap[0]).abs(),
        lipschitz: du.sup_norm(),
        max_laplacian: lap.max(),
        grid_step: grid.h(),
        newton_residual: report.final_residual_inf,
    })
}

/// Runs one sweep point per `λ` (concurrently) and fits the rate.
pub fn run_sweep(
    model: &HamiltonianModel,
    alpha: f64,
    lambdas: &[f64],
    n: usize,
) -> Result<SweepResult> {
    run_sweep_with(model, alpha, lambdas, n, &SweepOptions::default())
}

pub fn run_sweep_with(
    model: &HamiltonianModel,
    alpha: f64,
    lambdas: &[f64],
    n: usize,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda list".into()));
    }
    if let Some(&bad) = lambdas.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "lambda {bad} outside (0, 1)"
        )));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(
            "lambda list must be strictly decreasing".into(),
        ));
    }
    opts.viscous.validate()?;
    if uses_pendulum_ode(model, opts) && !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "the pendulum ODE needs an even n, got {n}"
        )));
    }
    let grid = Grid1D::torus(n)?;
    let run = || -> Vec<Result<SweepRecord>> {
        lambdas
            .par_iter()
            .map(|&lambda| sweep_point(model, alpha, lambda, &grid, opts))
            .collect()
    };
    let outcomes = match thread_count(opts.threads) {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&lambda, outcome) in lambdas.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push(SweepFailure {
                lambda,
                message: e.to_string(),
            }),
        }
    }
    let fit = if records.len() >= 3 && records.iter().all(|r| r.sup_diff > 0.0) {
        let points: Vec<(f64, f64)> = records.iter().map(|r| (r.lambda, r.sup_diff)).collect();
        fit_loglog_slope(&points)?
    } else {
        LogLogFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: f64::NAN,
        }
    };
    Ok(SweepResult {
        records,
        failures,
        alpha,
        fitted_slope: fit.slope,
        fitted_intercept: fit.intercept,
        r_squared: fit.r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log y` against `log x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidArgument(format!(
            "point ({x}, {y}) is not in the positive quadrant"
        )));
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fitted constant of a one-sided bound and how uniform it is across records.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    /// Largest per-record ratio; a valid constant for every record.
    pub constant: f64,
    pub ratios: Vec<f64>,
}

impl BoundCheck {
    fn new(ratios: Vec<f64>) -> Self {
        let constant = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { constant, ratios }
    }

    /// `max |r| / min |r|` when all ratios share a sign, `1` when all vanish,
    /// infinite otherwise.
    pub fn spread(&self) -> f64 {
        uniformity_factor(&self.ratios)
    }

    pub fn is_uniform(&self, factor: f64) -> bool {
        self.spread() <= factor
    }
}

/// `max |v| / min |v|` over values of one sign; `1` if all are zero.
pub fn uniformity_factor(values: &[f64]) -> f64 {
    if values.is_empty() || values.iter().all(|v| *v == 0.0) {
        return 1.0;
    }
    let positive = values.iter().all(|v| *v > 0.0);
    let negative = values.iter().all(|v| *v < 0.0);
    if !(positive || negative) {
        return f64::INFINITY;
    }
    let mags = values.iter().map(|v| v.abs());
    let hi = mags.clone().fold(0.0, f64::max);
    let lo = mags.fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Empirical `C` in `u^ε - u <= C ε/λ`.
pub fn check_upper_bound(records: &[SweepRecord]) -> BoundCheck {
    BoundCheck::new(records.iter().map(|r| r.c_delta_ratio).collect())
}

/// `ε/λ + ε |log ε|`.
pub fn lower_bound_scale(lambda: f64, epsilon: f64) -> f64 {
    epsilon / lambda + epsilon * epsilon.ln().abs()
}

/// Empirical `C` in `u - u^ε <= C (ε/λ + ε |log ε|)`, signed.
pub fn check_lower_bound(records: &[SweepRecord]) -> BoundCheck {
    BoundCheck::new(
        records
            .iter()
            .map(|r| r.gap_minus / lower_bound_scale(r.lambda, r.epsilon))
            .collect(),
    )
}

/// Whether `sup_diff <= max(C_up ε/λ, C_low (ε/λ + ε|log ε|))` for every record.
pub fn envelope_contains(records: &[SweepRecord], upper: &BoundCheck, lower: &BoundCheck) -> bool {
    records.iter().all(|r| {
        let up = upper.constant * r.epsilon / r.lambda;
        let low = lower.constant * lower_bound_scale(r.lambda, r.epsilon);
        r.sup_diff <= up.max(low) * (1.0 + 1e-12)
    })
}

fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with the fixed header, one row per record and a comment summary.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &result.records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig17(r.lambda),
            sig17(r.epsilon),
            sig17(r.sup_diff),
            sig17(r.diff_at_zero),
            sig17(r.c_delta_ratio),
            r.newton_iters
        )?;
    }
    writeln!(out, "# alpha={}", sig17(result.alpha))?;
    writeln!(out, "# fitted_slope={}", sig17(result.fitted_slope))?;
    writeln!(out, "# fitted_intercept={}", sig17(result.fitted_intercept))?;
    writeln!(out, "# r_squared={}", sig17(result.r_squared))?;
    for f in &result.failures {
        writeln!(
            out,
            "# failed lambda={} error={}",
            sig17(f.lambda),
            f.message
        )?;
    }
    Ok(())
}

pub fn sweep_csv_string(result: &SweepResult) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(result, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
