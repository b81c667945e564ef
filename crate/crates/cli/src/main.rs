//! `hjvisc` command-line front end.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{HamiltonianSpec, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "hjvisc",
    version,
    about = "Discounted viscous Hamilton-Jacobi solvers on the circle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Newton solve of λu + H(x,u') = εu''; writes the field as `x,value` CSV.
    SolveViscous {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        newton: NewtonArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Inviscid solution: pendulum ODE, or Lax-Friedrichs for other models.
    SolveInviscid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
        /// Lax-Friedrichs dissipation bound (default: estimated from the potential).
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        lf_tol: Option<f64>,
    },
    /// Stationary adjoint density of the viscous solution.
    Adjoint {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        newton: NewtonArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Grid node carrying the point source.
        #[arg(long)]
        x0_index: Option<usize>,
    },
    /// Ergodic constant c(ε) by extrapolating λu(0) to λ = 0.
    Ergodic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        newton: NewtonArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Decreasing λ values, comma separated.
        #[arg(long, value_delimiter = ',')]
        lambda_list: Option<Vec<f64>>,
    },
    /// Sup-convolution of the inviscid solution and its subsolution defect.
    Supconv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Vanishing-viscosity sweep with ε = λ^(1+α).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        newton: NewtonArgs,
        #[arg(long)]
        alpha: Option<f64>,
        /// Decreasing λ values, comma separated.
        #[arg(long, value_delimiter = ',')]
        lambda_list: Option<Vec<f64>>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    dump_config: bool,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `pendulum` or `flat`; inline potentials go in the config file.
    #[arg(long)]
    hamiltonian: Option<String>,
    /// Number of grid nodes.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct NewtonArgs {
    /// Newton residual tolerance (inf-norm).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_newton_iters: Option<usize>,
}

impl Common {
    fn flags(&self) -> RunConfig {
        RunConfig {
            hamiltonian: self.hamiltonian.clone().map(HamiltonianSpec::Name),
            n: self.n,
            out: self.out.clone(),
            ..RunConfig::default()
        }
    }
}

impl NewtonArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.tol = self.tol;
        cfg.max_newton_iters = self.max_newton_iters;
    }
}

fn split(command: Command) -> (commands::Kind, Common, RunConfig) {
    use commands::Kind;
    match command {
        Command::SolveViscous {
            common,
            newton,
            lambda,
            epsilon,
        } => {
            let mut f = common.flags();
            newton.apply(&mut f);
            f.lambda = lambda;
            f.epsilon = epsilon;
            (Kind::SolveViscous, common, f)
        }
        Command::SolveInviscid {
            common,
            lambda,
            sigma,
            lf_tol,
        } => {
            let mut f = common.flags();
            f.lambda = lambda;
            f.sigma = sigma;
            f.lf_tol = lf_tol;
            (Kind::SolveInviscid, common, f)
        }
        Command::Adjoint {
            common,
            newton,
            lambda,
            epsilon,
            x0_index,
        } => {
            let mut f = common.flags();
            newton.apply(&mut f);
            f.lambda = lambda;
            f.epsilon = epsilon;
            f.x0_index = x0_index;
            (Kind::Adjoint, common, f)
        }
        Command::Ergodic {
            common,
            newton,
            epsilon,
            lambda_list,
        } => {
            let mut f = common.flags();
            newton.apply(&mut f);
            f.epsilon = epsilon;
            f.lambda_list = lambda_list;
            (Kind::Ergodic, common, f)
        }
        Command::Supconv {
            common,
            lambda,
            delta,
        } => {
            let mut f = common.flags();
            f.lambda = lambda;
            f.delta = delta;
            (Kind::Supconv, common, f)
        }
        Command::Sweep {
            common,
            newton,
            alpha,
            lambda_list,
        } => {
            let mut f = common.flags();
            newton.apply(&mut f);
            f.alpha = alpha;
            f.lambda_list = lambda_list;
            (Kind::Sweep, common, f)
        }
    }
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    let (kind, common, flags) = split(cli.command);
    let base = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = commands::resolve(kind, base.overlay(flags))?;
    if common.dump_config {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    commands::execute(kind, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
