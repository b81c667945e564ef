use std::fmt::Write as _;
use std::io::Write;

use hjvisc::harness::{default_lambdas, run_sweep_with, write_sweep_csv, SweepOptions};
use hjvisc::inviscid::{solve_discounted_lax_friedrichs_with, Dissipation, LaxFriedrichsOptions};
use hjvisc::measures::estimate_ergodic_constant_with;
use hjvisc::{
    solve_adjoint_stationary, solve_pendulum_ode, solve_viscous, subsolution_defect,
    sup_convolution, Grid1D, HamiltonianModel, ScalarField, ViscousOptions,
};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    SolveViscous,
    SolveInviscid,
    Adjoint,
    Ergodic,
    Supconv,
    Sweep,
}

const DEFAULT_TOL: f64 = 1e-10;
const DEFAULT_NEWTON_ITERS: usize = 200;
const DEFAULT_LF_TOL: f64 = 1e-9;
const ERGODIC_LAMBDAS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Fills defaults and validates every field the command uses.
pub fn resolve(kind: Kind, mut cfg: RunConfig) -> Result<RunConfig, CliError> {
    cfg.hamiltonian = Some(cfg.hamiltonian_spec());
    cfg.n
        .get_or_insert(if kind == Kind::Sweep { 2048 } else { 1024 });
    if matches!(
        kind,
        Kind::SolveViscous | Kind::Adjoint | Kind::Ergodic | Kind::Sweep
    ) {
        cfg.tol.get_or_insert(DEFAULT_TOL);
        cfg.max_newton_iters.get_or_insert(DEFAULT_NEWTON_ITERS);
    }
    match kind {
        Kind::SolveViscous => {
            RunConfig::require_positive(cfg.lambda, "lambda")?;
            RunConfig::require_positive(cfg.epsilon, "epsilon")?;
        }
        Kind::SolveInviscid => {
            RunConfig::require_positive(cfg.lambda, "lambda")?;
            RunConfig::check_positive(cfg.sigma, "sigma")?;
            RunConfig::require_positive(Some(*cfg.lf_tol.get_or_insert(DEFAULT_LF_TOL)), "lf-tol")?;
        }
        Kind::Adjoint => {
            RunConfig::require_positive(cfg.lambda, "lambda")?;
            RunConfig::require_positive(cfg.epsilon, "epsilon")?;
            let x0 = *cfg.x0_index.get_or_insert(0);
            if x0 >= cfg.n.unwrap() {
                return Err(CliError::Usage(format!(
                    "--x0-index {x0} outside a grid of {} nodes",
                    cfg.n.unwrap()
                )));
            }
        }
        Kind::Ergodic => {
            RunConfig::require_positive(cfg.epsilon, "epsilon")?;
            check_lambda_list(
                cfg.lambda_list
                    .get_or_insert_with(|| ERGODIC_LAMBDAS.to_vec()),
            )?;
        }
        Kind::Supconv => {
            RunConfig::require_positive(cfg.lambda, "lambda")?;
            RunConfig::require_positive(cfg.delta, "delta")?;
        }
        Kind::Sweep => {
            let alpha = RunConfig::require_positive(cfg.alpha, "alpha")?;
            if alpha >= 1.0 {
                return Err(CliError::Usage(format!(
                    "--alpha must lie in (0, 1), got {alpha}"
                )));
            }
            check_lambda_list(cfg.lambda_list.get_or_insert_with(default_lambdas))?;
            RunConfig::require_positive(Some(*cfg.lf_tol.get_or_insert(DEFAULT_LF_TOL)), "lf-tol")?;
        }
    }
    RunConfig::check_positive(cfg.tol, "tol")?;
    if cfg.max_newton_iters == Some(0) {
        return Err(CliError::Usage(
            "--max-newton-iters must be at least 1".into(),
        ));
    }
    let grid = Grid1D::torus(cfg.n.unwrap())?;
    cfg.model(&grid)?;
    Ok(cfg)
}

fn check_lambda_list(list: &[f64]) -> Result<(), CliError> {
    if list.is_empty() {
        return Err(CliError::Usage("--lambda-list is empty".into()));
    }
    if list.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(CliError::Usage(format!(
            "--lambda-list entries must be positive: {list:?}"
        )));
    }
    if list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(CliError::Usage(format!(
            "--lambda-list must be strictly decreasing: {list:?}"
        )));
    }
    Ok(())
}

fn viscous_options(cfg: &RunConfig) -> ViscousOptions {
    ViscousOptions {
        tol_residual_inf: cfg.tol.unwrap_or(DEFAULT_TOL),
        max_newton_iters: cfg.max_newton_iters.unwrap_or(DEFAULT_NEWTON_ITERS),
        ..ViscousOptions::default()
    }
}

fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_csv(u: &ScalarField) -> String {
    let mut s = String::from("x,value\n");
    for (j, v) in u.values().iter().enumerate() {
        let _ = writeln!(s, "{},{}", sig17(u.grid().x(j)), sig17(*v));
    }
    s
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn viscous_field(
    model: &HamiltonianModel,
    cfg: &RunConfig,
    grid: &Grid1D,
) -> Result<ScalarField, CliError> {
    let (lambda, eps) = (cfg.lambda.unwrap(), cfg.epsilon.unwrap());
    let (u, report) = solve_viscous(model, lambda, eps, grid, &viscous_options(cfg))?;
    if !report.converged {
        return Err(CliError::NotConverged(format!(
            "Newton stalled at residual {:.3e} after {} iterations",
            report.final_residual_inf, report.iterations
        )));
    }
    eprintln!(
        "newton: {} iterations, residual {:.3e}, {} continuation stages",
        report.iterations, report.final_residual_inf, report.continuation_steps
    );
    Ok(u)
}

fn inviscid_field(
    model: &HamiltonianModel,
    cfg: &RunConfig,
    grid: &Grid1D,
) -> Result<ScalarField, CliError> {
    let lambda = cfg.lambda.unwrap();
    if model.name() == "pendulum" {
        if !grid.n().is_multiple_of(2) {
            return Err(CliError::Usage(format!(
                "the pendulum ODE needs an even n, got {}",
                grid.n()
            )));
        }
        return Ok(solve_pendulum_ode(lambda, grid.n() / 2)?);
    }
    let sigma = match cfg.sigma {
        Some(s) => s,
        None => {
            // |p| <= sqrt(2 osc V) for the solution of p²/2 + V = -λu
            let v: Vec<f64> = grid
                .nodes()
                .map(|x| model.potential(x).unwrap_or(0.0))
                .collect();
            let osc = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - v.iter().cloned().fold(f64::INFINITY, f64::min);
            let p = (2.0 * osc).sqrt() + 1.0;
            grid.nodes()
                .map(|x| model.dhdp(x, p).abs().max(model.dhdp(x, -p).abs()))
                .fold(0.0, f64::max)
        }
    };
    let opts = LaxFriedrichsOptions {
        dissipation: Dissipation::Local,
        ..LaxFriedrichsOptions::new(sigma, cfg.lf_tol.unwrap_or(DEFAULT_LF_TOL))
    };
    let (u, report) = solve_discounted_lax_friedrichs_with(model, lambda, grid, &opts)?;
    if !report.converged {
        return Err(CliError::NotConverged(format!(
            "Lax-Friedrichs update {:.3e} after {} sweeps",
            report.final_residual_inf, report.iterations
        )));
    }
    Ok(u)
}

pub fn execute(kind: Kind, cfg: &RunConfig) -> Result<(), CliError> {
    let grid = Grid1D::torus(cfg.n.unwrap())?;
    let model = cfg.model(&grid)?;
    match kind {
        Kind::SolveViscous => emit(cfg, &field_csv(&viscous_field(&model, cfg, &grid)?)),
        Kind::SolveInviscid => emit(cfg, &field_csv(&inviscid_field(&model, cfg, &grid)?)),
        Kind::Adjoint => {
            let u = viscous_field(&model, cfg, &grid)?;
            let theta = solve_adjoint_stationary(
                &model,
                &u,
                cfg.lambda.unwrap(),
                cfg.epsilon.unwrap(),
                cfg.x0_index.unwrap(),
            )?;
            eprintln!(
                "adjoint: renormalization factor {:.12}",
                theta.renormalization()
            );
            emit(cfg, &field_csv(&theta.to_field()))
        }
        Kind::Ergodic => {
            let c = estimate_ergodic_constant_with(
                &model,
                cfg.epsilon.unwrap(),
                cfg.lambda_list.as_ref().unwrap(),
                &grid,
                &viscous_options(cfg),
            )?;
            emit(cfg, &format!("c(epsilon) = {}\n", sig17(c)))
        }
        Kind::Supconv => {
            let u = inviscid_field(&model, cfg, &grid)?;
            let ud = sup_convolution(&u, cfg.delta.unwrap())?;
            eprintln!(
                "subsolution defect: {:.6e}",
                subsolution_defect(&ud, cfg.lambda.unwrap(), &model)
            );
            emit(cfg, &field_csv(&ud))
        }
        Kind::Sweep => {
            let opts = SweepOptions {
                viscous: viscous_options(cfg),
                lf_tol: cfg.lf_tol.unwrap_or(DEFAULT_LF_TOL),
                ..SweepOptions::default()
            };
            let res = run_sweep_with(
                &model,
                cfg.alpha.unwrap(),
                cfg.lambda_list.as_ref().unwrap(),
                grid.n(),
                &opts,
            )?;
            let mut buf = Vec::new();
            write_sweep_csv(&res, &mut buf)?;
            emit(cfg, &String::from_utf8(buf).expect("ascii csv"))?;
            if res.failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::NotConverged(format!(
                    "{} sweep point(s) failed",
                    res.failures.len()
                )))
            }
        }
    }
}
