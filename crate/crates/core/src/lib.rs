//! Numerical toolkit for the discounted viscous Hamilton–Jacobi equation
//! `λu + H(x, u') = εu''` on the circle and its inviscid limit.
//!
//! * [`viscous`]: Newton finite-difference solver (periodic and half-interval Neumann).
//! * [`inviscid`]: exact pendulum ODE solution and a monotone Lax–Friedrichs scheme.
//! * [`adjoint`]: stationary adjoint densities, Fokker–Planck evolution, averaged drifts.
//! * [`measures`]: ergodic constants and discrete Mather-measure diagnostics.
//! * [`regularize`]: sup-convolution and the approximate-subsolution defect.
//! * [`harness`]: vanishing-viscosity rate sweeps, bound checks and CSV output.

pub mod adjoint;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod harness;
pub mod inviscid;
pub mod measures;
pub mod regularize;
pub mod stencil;
pub mod tridiag;
pub mod viscous;

pub use adjoint::{
    averaged_drift, entropy_diagnostic, evolve_fokker_planck, solve_adjoint_stationary,
    stationary_from_transient, DensityField,
};
pub use error::{Error, Result};
pub use grid::{inf_norm_diff, Grid1D, ScalarField};
pub use hamiltonian::{
    convex_hamiltonian, flat_hamiltonian, pendulum_hamiltonian, separable_from_samples,
    separable_hamiltonian, HamiltonianModel,
};
pub use harness::{
    check_lower_bound, check_upper_bound, fit_loglog_slope, run_sweep, SweepRecord, SweepResult,
};
pub use inviscid::{solve_discounted_lax_friedrichs, solve_pendulum_ode};
pub use measures::{
    closedness_defect, estimate_ergodic_constant, extract_measure, measure_action, DiscreteMeasure,
};
pub use regularize::{subsolution_defect, sup_convolution};
pub use viscous::{
    solve_viscous, solve_viscous_neumann, Discretization, SolveReport, ViscousOptions,
};
