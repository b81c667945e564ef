//! Adjoint densities: the stationary equation `λθ - (bθ)' - εθ'' = λδ_{x0}`,
//! the Fokker–Planck evolution `ρ_t = (bρ)' + ερ''`, and the discounted
//! time average linking the two.
//!
//! Divergences use half-node fluxes
//! `F_{j+1/2} = b_{j+1/2} (θ_j + θ_{j+1})/2 + ν_{j+1/2} (θ_{j+1} - θ_j)/h`
//! with `b_{j+1/2}` the average of the nodal drifts and
//! `ν_{j+1/2} = max(ε, |b_{j+1/2}| h/2)`, so every column of the operator sums
//! to zero and its off-diagonal entries are nonnegative.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::hamiltonian::HamiltonianModel;
use crate::stencil::central_gradient;
use crate::tridiag::{CyclicFactorization, CyclicTridiagonal};

pub const MASS_TOL: f64 = 1e-8;
pub const NEGATIVITY_TOL: f64 = 1e-12;
/// Stationary solutions with entries below `-REJECT_TOL` are rejected.
pub const REJECT_TOL: f64 = 1e-8;
/// Allowed deviation of the post-solve renormalization factor from 1.
pub const RENORMALIZATION_TOL: f64 = 1e-6;
/// Largest admissible `exp(-λT)` when averaging a transient.
pub const MAX_TAIL: f64 = 1e-6;
/// Densities are clamped here before taking logarithms.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Nonnegative grid function with `h Σ ρ_j = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid1D,
    values: Vec<f64>,
    renormalization: f64,
}

impl DensityField {
    /// Checks mass and sign; entries in `[-1e-12, 0)` are kept as they are.
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(grid, values, MASS_TOL)
    }

    fn with_tolerance(grid: Grid1D, values: Vec<f64>, mass_tol: f64) -> Result<Self> {
        let field = ScalarField::new(grid, values)?;
        let values = field.into_values();
        let mass = grid.h() * values.iter().sum::<f64>();
        if (mass - 1.0).abs() > mass_tol {
            return Err(Error::Mass { mass });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| **v < -NEGATIVITY_TOL)
        {
            return Err(Error::NegativeDensity { index, value });
        }
        Ok(Self {
            grid,
            values,
            renormalization: 1.0,
        })
    }

    /// Uniform density `1 / length`.
    pub fn uniform(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![1.0 / grid.length(); grid.n()],
            renormalization: 1.0,
        }
    }

    /// Discrete Dirac mass `1/h` at node `j`.
    pub fn point_mass(grid: Grid1D, j: usize) -> Result<Self> {
        if j >= grid.n() {
            return Err(Error::InvalidArgument(format!(
                "node {j} outside a grid of {} nodes",
                grid.n()
            )));
        }
        let mut values = vec![0.0; grid.n()];
        values[j] = 1.0 / grid.h();
        Ok(Self {
            grid,
            values,
            renormalization: 1.0,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.h() * self.values.iter().sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Factor the raw solve was divided by to reach unit mass.
    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    /// `h Σ f_j ρ_j`.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n(),
                right: f.grid().n(),
            });
        }
        Ok(self.grid.h()
            * f.values()
                .iter()
                .zip(&self.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField::new(self.grid, self.values.clone()).expect("density values are finite")
    }
}

impl std::ops::Index<usize> for DensityField {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.values[j]
    }
}

/// Nodal drift `b_j = ∂_pH(x_j, Du_j)` from central differences.
pub fn adjoint_drift(model: &HamiltonianModel, u: &ScalarField) -> ScalarField {
    let g = *u.grid();
    let du = central_gradient(u);
    let b = (0..g.n()).map(|j| model.dhdp(g.x(j), du[j])).collect();
    ScalarField::new(g, b).expect("finite drift")
}

/// The conservative operator `θ ↦ (bθ)' + (flux-limited ε θ')'`.
pub fn fokker_planck_operator(drift: &ScalarField, epsilon: f64) -> Result<CyclicTridiagonal> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let g = drift.grid();
    let n = g.n();
    let h = g.h();
    let b = drift.values();
    // face j sits between nodes j and j+1
    let faces: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let bf = 0.5 * (b[j] + b[g.next(j)]);
            (bf, epsilon.max(0.5 * bf.abs() * h))
        })
        .collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for j in 0..n {
        let (br, nr) = faces[j];
        let (bl, nl) = faces[g.prev(j)];
        sup[j] = (0.5 * br + nr / h) / h;
        sub[j] = (-0.5 * bl + nl / h) / h;
        diag[j] = (0.5 * br - nr / h - 0.5 * bl - nl / h) / h;
    }
    CyclicTridiagonal::new(sub, diag, sup)
}

fn check_index(grid: &Grid1D, x0_index: usize) -> Result<()> {
    if x0_index >= grid.n() {
        return Err(Error::InvalidArgument(format!(
            "x0 index {x0_index} outside a grid of {} nodes",
            grid.n()
        )));
    }
    Ok(())
}

/// The matrix `λI - A` of the stationary adjoint system.
pub fn adjoint_matrix(drift: &ScalarField, lambda: f64, epsilon: f64) -> Result<CyclicTridiagonal> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let mut m = fokker_planck_operator(drift, epsilon)?;
    for j in 0..m.len() {
        m.sub[j] = -m.sub[j];
        m.sup[j] = -m.sup[j];
        m.diag[j] = lambda - m.diag[j];
    }
    Ok(m)
}

/// Solves `λθ - Aθ = λδ_{x0}` for a given drift field.
pub fn solve_adjoint_with_drift(
    drift: &ScalarField,
    lambda: f64,
    epsilon: f64,
    x0_index: usize,
) -> Result<DensityField> {
    let g = *drift.grid();
    check_index(&g, x0_index)?;
    let m = adjoint_matrix(drift, lambda, epsilon)?;
    let mut rhs = vec![0.0; g.n()];
    rhs[x0_index] = lambda / g.h();
    let mut theta = m.solve(&rhs)?;
    if let Some(index) = theta.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if let Some((index, &value)) = theta
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, v)| **v < -REJECT_TOL)
    {
        return Err(Error::NegativeDensity { index, value });
    }
    let mass = g.h() * theta.iter().sum::<f64>();
    if (mass - 1.0).abs() > RENORMALIZATION_TOL {
        return Err(Error::Mass { mass });
    }
    for v in &mut theta {
        *v = (*v / mass).max(0.0);
    }
    let mut density = DensityField::new(g, theta)?;
    density.renormalization = mass;
    Ok(density)
}

/// Stationary adjoint density of the viscous solution `u`.
pub fn solve_adjoint_stationary(
    model: &HamiltonianModel,
    u: &ScalarField,
    lambda: f64,
    epsilon: f64,
    x0_index: usize,
) -> Result<DensityField> {
    solve_adjoint_with_drift(&adjoint_drift(model, u), lambda, epsilon, x0_index)
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub density: DensityField,
}

/// Implicit-Euler Fokker–Planck stream; yields `ρ(·, 0) = δ_{x0}` first.
pub struct FokkerPlanck {
    factorization: CyclicFactorization,
    grid: Grid1D,
    current: Vec<f64>,
    dt: f64,
    step: usize,
    steps: usize,
    failed: bool,
}

impl FokkerPlanck {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of implicit steps, excluding the initial snapshot.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn final_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

impl Iterator for FokkerPlanck {
    type Item = Result<Snapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.step > self.steps {
            return None;
        }
        if self.step > 0 {
            match self.factorization.solve(&self.current) {
                Ok(next) => self.current = next,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        let step = self.step;
        self.step += 1;
        match DensityField::new(self.grid, self.current.clone()) {
            Ok(density) => Some(Ok(Snapshot {
                step,
                time: step as f64 * self.dt,
                density,
            })),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = if self.failed {
            0
        } else {
            self.steps + 1 - self.step.min(self.steps + 1)
        };
        (left, Some(left))
    }
}

/// Evolves `ρ_t = (bρ)' + ερ''` from a point mass at `x0` up to the first
/// multiple of `dt` that reaches `t_final`.
pub fn evolve_fokker_planck(
    drift: &ScalarField,
    epsilon: f64,
    x0_index: usize,
    t_final: f64,
    dt: f64,
) -> Result<FokkerPlanck> {
    let grid = *drift.grid();
    check_index(&grid, x0_index)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(t_final.is_finite() && t_final >= dt) {
        return Err(Error::InvalidArgument(format!(
            "T = {t_final} must be at least dt = {dt}"
        )));
    }
    let mut m = fokker_planck_operator(drift, epsilon)?;
    for j in 0..m.len() {
        m.sub[j] *= -dt;
        m.sup[j] *= -dt;
        m.diag[j] = 1.0 - dt * m.diag[j];
    }
    let steps = (t_final / dt - 1e-9).ceil() as usize;
    Ok(FokkerPlanck {
        factorization: m.factor()?,
        current: DensityField::point_mass(grid, x0_index)?.values,
        grid,
        dt,
        step: 0,
        steps,
        failed: false,
    })
}

/// Weights `(α, β)` with `∫_0^Δ λ e^{-λs} ((1 - s/Δ) f_0 + (s/Δ) f_1) ds = α f_0 + β f_1`.
pub fn exponential_panel_weights(lambda: f64, delta: f64) -> (f64, f64) {
    let a = lambda * delta;
    let total = -(-a).exp_m1();
    let beta = if a < 1e-4 {
        a / 2.0 - a * a / 3.0 + a * a * a / 8.0
    } else {
        (total - a * (-a).exp()) / a
    };
    (total - beta, beta)
}

/// Discounted time average `∫_0^T λ e^{-λt} ρ dt + e^{-λT} ρ(T)` of a
/// snapshot stream that starts at `t = 0`.
///
/// Snapshots are interpolated linearly in time and the exponential is
/// integrated exactly on each panel. On the first panel the initial point
/// mass is replaced by the first implicit step.
pub fn stationary_from_transient<I>(snapshots: I, lambda: f64) -> Result<DensityField>
where
    I: IntoIterator<Item = Result<Snapshot>>,
{
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let mut iter = snapshots.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty snapshot sequence".into()))??;
    let second = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("need at least two snapshots".into()))??;
    let grid = *first.density.grid();
    let mut acc = vec![0.0; grid.n()];
    let first_weight = -(-lambda * (second.time - first.time)).exp_m1();
    for (a, r) in acc.iter_mut().zip(second.density.values()) {
        *a += first_weight * r;
    }
    let mut prev = second;
    for snap in iter {
        let snap = snap?;
        let (alpha, beta) = exponential_panel_weights(lambda, snap.time - prev.time);
        let decay = (-lambda * (prev.time - first.time)).exp();
        let (wa, wb) = (decay * alpha, decay * beta);
        for ((a, r0), r1) in acc
            .iter_mut()
            .zip(prev.density.values())
            .zip(snap.density.values())
        {
            *a += wa * r0 + wb * r1;
        }
        prev = snap;
    }
    let tail = (-lambda * (prev.time - first.time)).exp();
    if tail > MAX_TAIL {
        return Err(Error::HorizonTooShort { tail });
    }
    for (a, r) in acc.iter_mut().zip(prev.density.values()) {
        *a += tail * r;
    }
    DensityField::with_tolerance(grid, acc, 1e-6)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(q);
    for i in 0..q {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if q == 0 { 1.0 } else { p1 };
            let pm = if q == 1 { 1.0 } else { p0 };
            dp = q as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Node-wise `∫_0^1 ∂_pH(x, r Du_eps + (1-r) Du_delta) dr` by Gauss–Legendre.
pub fn averaged_drift(
    u_eps: &ScalarField,
    u_delta: &ScalarField,
    model: &HamiltonianModel,
    quad_points: usize,
) -> Result<ScalarField> {
    u_eps.check_same_grid(u_delta)?;
    if quad_points < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 quadrature points, got {quad_points}"
        )));
    }
    let g = *u_eps.grid();
    let pe = central_gradient(u_eps);
    let pd = central_gradient(u_delta);
    let rule = gauss_legendre(quad_points);
    let out = (0..g.n())
        .map(|j| {
            let x = g.x(j);
            rule.iter()
                .map(|&(r, w)| w * model.dhdp(x, r * pe[j] + (1.0 - r) * pd[j]))
                .sum()
        })
        .collect();
    ScalarField::new(g, out)
}

/// `h Σ |log ρ_j| ρ_j` with `ρ` clamped below at `1e-300`.
pub fn entropy_diagnostic(rho: &DensityField) -> f64 {
    rho.grid.h()
        * rho
            .values
            .iter()
            .map(|&r| {
                let r = r.max(ENTROPY_FLOOR);
                r.ln().abs() * r
            })
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{flat_hamiltonian, pendulum_hamiltonian};
    use crate::viscous::{solve_viscous, ViscousOptions};
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    fn dense_solve(m: &CyclicTridiagonal, rhs: &[f64]) -> Vec<f64> {
        let n = m.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            a[(j, (j + n - 1) % n)] += m.sub[j];
            a[(j, j)] += m.diag[j];
            a[(j, (j + 1) % n)] += m.sup[j];
        }
        a.lu()
            .solve(&DVector::from_column_slice(rhs))
            .unwrap()
            .as_slice()
            .to_vec()
    }

    #[test]
    fn density_validation() {
        let g = Grid1D::torus(16).unwrap();
        assert!(matches!(
            DensityField::new(g, vec![1.0; 16]),
            Err(Error::Mass { .. })
        ));
        let mut v = vec![1.0 / (2.0 * PI); 16];
        v[0] -= 0.1;
        v[1] += 0.1;
        assert!(DensityField::new(g, v.clone()).is_ok());
        v[0] = -1e-6;
        v[1] = 2.0 / (2.0 * PI) + 1e-6;
        assert!(matches!(
            DensityField::new(g, v),
            Err(Error::NegativeDensity { index: 0, .. })
        ));
        assert!((DensityField::point_mass(g, 3).unwrap().mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn operator_columns_sum_to_zero_and_off_diagonals_are_nonnegative() {
        let g = Grid1D::torus(64).unwrap();
        let drift = ScalarField::from_fn(g, |x| 40.0 * x.sin() + 3.0 * (2.0 * x).cos()).unwrap();
        let a = fokker_planck_operator(&drift, 1e-3).unwrap();
        for s in a.transpose().row_sums() {
            assert!(s.abs() < 1e-9);
        }
        let scale = a.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        assert!(a.sub.iter().chain(&a.sup).all(|&v| v >= -1e-14 * scale));
    }

    #[test]
    fn flat_adjoint_is_symmetric() {
        let g = Grid1D::torus(128).unwrap();
        let u = ScalarField::zeros(g);
        let theta = solve_adjoint_stationary(&flat_hamiltonian(), &u, 0.3, 0.1, 40).unwrap();
        assert!((theta.mass() - 1.0).abs() < 1e-12);
        assert!((theta.renormalization() - 1.0).abs() < 1e-12);
        for k in 1..64 {
            assert!((theta[40 + k] - theta[(40 + 128 - k) % 128]).abs() < 1e-10 * theta[40]);
        }
        // discrete check of λθ - εΔθ = λδ
        let h = g.h();
        for j in 0..128 {
            let lap = (theta[(j + 1) % 128] - 2.0 * theta[j] + theta[(j + 127) % 128]) / (h * h);
            let rhs = if j == 40 { 0.3 / h } else { 0.0 };
            assert!((0.3 * theta[j] - 0.1 * lap - rhs).abs() < 1e-9 * (1.0 + rhs));
        }
    }

    #[test]
    fn adjoint_matches_dense_solve() {
        let g = Grid1D::torus(32).unwrap();
        let model = pendulum_hamiltonian();
        let (u, _) = solve_viscous(&model, 0.2, 0.3, &g, &ViscousOptions::default()).unwrap();
        let drift = adjoint_drift(&model, &u);
        let theta = solve_adjoint_with_drift(&drift, 0.2, 0.3, 5).unwrap();
        let mut rhs = vec![0.0; 32];
        rhs[5] = 0.2 / g.h();
        let dense = dense_solve(&adjoint_matrix(&drift, 0.2, 0.3).unwrap(), &rhs);
        for j in 0..32 {
            assert!((theta[j] * theta.renormalization() - dense[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn pendulum_adjoint_has_unit_mass() {
        let g = Grid1D::torus(512).unwrap();
        let model = pendulum_hamiltonian();
        let (u, _) = solve_viscous(&model, 0.05, 0.1, &g, &ViscousOptions::default()).unwrap();
        let theta = solve_adjoint_stationary(&model, &u, 0.05, 0.1, 256).unwrap();
        assert!((theta.mass() - 1.0).abs() < 1e-8);
        assert!(theta.min() >= -1e-12);
        assert!((theta.renormalization() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn heat_flow_relaxes_to_uniform() {
        let g = Grid1D::torus(64).unwrap();
        let eps = 0.5;
        let t_final = 5.0 * (2.0 * PI).powi(2) / eps;
        let drift = ScalarField::zeros(g);
        let mut last = None;
        let mut entropies = Vec::new();
        for snap in evolve_fokker_planck(&drift, eps, 10, t_final, 0.05).unwrap() {
            let snap = snap.unwrap();
            assert!((snap.density.mass() - 1.0).abs() < 1e-8);
            assert!(snap.density.min() >= -1e-12);
            entropies.push(entropy_diagnostic(&snap.density));
            last = Some(snap);
        }
        let target = (2.0 * PI).ln();
        let stride = entropies.len() / 20;
        let gaps: Vec<f64> = entropies
            .iter()
            .step_by(stride)
            .map(|e| (e - target).abs())
            .collect();
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{gaps:?}");
        }
        let prev_entropy = *entropies.last().unwrap();
        let last = last.unwrap();
        assert!(last.time >= t_final);
        let uniform = 1.0 / (2.0 * PI);
        assert!(last
            .density
            .values()
            .iter()
            .all(|r| (r - uniform).abs() <= 1e-6));
        assert!((prev_entropy - (2.0 * PI).ln()).abs() < 1e-5);
    }

    #[test]
    fn symmetric_drift_keeps_symmetry() {
        let g = Grid1D::torus(64).unwrap();
        let x0 = 16;
        let xc = g.x(x0);
        // odd about x0, so the flow is mirror symmetric
        let drift = ScalarField::from_fn(g, |x| (x - xc).sin()).unwrap();
        for snap in evolve_fokker_planck(&drift, 0.05, x0, 1.0, 0.01).unwrap() {
            let rho = snap.unwrap().density;
            for k in 1..32 {
                assert!((rho[(x0 + k) % 64] - rho[(x0 + 64 - k) % 64]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mass_after_many_steps() {
        let g = Grid1D::torus(64).unwrap();
        let drift = ScalarField::from_fn(g, |x| 2.0 * x.cos() + 0.5).unwrap();
        let fp = evolve_fokker_planck(&drift, 0.01, 3, 1000.0 * 0.01, 0.01).unwrap();
        assert_eq!(fp.steps(), 1000);
        let last = fp.last().unwrap().unwrap();
        assert_eq!(last.step, 1000);
        assert!((last.density.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn panel_weights_sum_to_discounted_mass() {
        for (lambda, dt, steps) in [
            (0.5f64, 0.01f64, 5000usize),
            (2.0, 0.1, 100),
            (1e-3, 0.5, 50_000),
        ] {
            let mut total = -(-lambda * dt).exp_m1();
            for k in 1..steps {
                let (a, b) = exponential_panel_weights(lambda, dt);
                total += (-lambda * k as f64 * dt).exp() * (a + b);
            }
            let exact = -(-lambda * steps as f64 * dt).exp_m1();
            assert!((total - exact).abs() < 1e-10, "{total} vs {exact}");
        }
        // both branches against composite Simpson
        for delta in [1e-6, 0.999e-4, 1.001e-4, 0.3, 2.0] {
            let (alpha, beta) = exponential_panel_weights(1.5, delta);
            let m = 2000;
            let f = |s: f64| 1.5 * (-1.5 * s).exp() * s / delta;
            let step = delta / m as f64;
            let simpson: f64 = (0..m)
                .map(|i| {
                    let a = i as f64 * step;
                    step / 6.0 * (f(a) + 4.0 * f(a + 0.5 * step) + f(a + step))
                })
                .sum();
            assert!((beta - simpson).abs() < 1e-13, "delta {delta}");
            assert!((alpha + beta + (-1.5 * delta).exp_m1()).abs() < 1e-15);
        }
    }

    #[test]
    fn transient_average_rejects_short_horizon() {
        let g = Grid1D::torus(32).unwrap();
        let drift = ScalarField::zeros(g);
        let fp = evolve_fokker_planck(&drift, 0.1, 0, 5.0, 0.1).unwrap();
        assert!(matches!(
            stationary_from_transient(fp, 1.0),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn transient_average_matches_stationary() {
        let g = Grid1D::torus(64).unwrap();
        let drift = ScalarField::from_fn(g, |x| 0.8 * x.sin() + 0.3).unwrap();
        let (lambda, eps) = (0.05, 0.1);
        let stationary = solve_adjoint_with_drift(&drift, lambda, eps, 7).unwrap();
        let fp = evolve_fokker_planck(&drift, eps, 7, 20.0 / lambda, 0.0025).unwrap();
        let averaged = stationary_from_transient(fp, lambda).unwrap();
        let gap = inf_norm_diff_density(&averaged, &stationary);
        assert!(
            gap / stationary.values().iter().cloned().fold(0.0, f64::max) < 1e-3,
            "gap {gap}"
        );
    }

    fn inf_norm_diff_density(a: &DensityField, b: &DensityField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn discounted_average_favours_uniform_for_small_lambda() {
        let g = Grid1D::torus(64).unwrap();
        let drift = ScalarField::zeros(g);
        let uniform = 1.0 / (2.0 * PI);
        let dist = |lambda: f64| {
            let fp = evolve_fokker_planck(&drift, 0.2, 0, 20.0 / lambda, 0.05).unwrap();
            let avg = stationary_from_transient(fp, lambda).unwrap();
            avg.values()
                .iter()
                .fold(0.0f64, |m, r| m.max((r - uniform).abs()))
        };
        assert!(dist(0.05) < dist(1.0));
    }

    #[test]
    fn gauss_legendre_rules() {
        for q in [1, 2, 4, 7, 16] {
            let rule = gauss_legendre(q);
            assert!((rule.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-14);
            // exact for polynomials of degree 2q - 1
            let deg = 2 * q - 1;
            let integral: f64 = rule.iter().map(|&(r, w)| w * r.powi(deg as i32)).sum();
            assert!((integral - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn averaged_drift_examples() {
        let g = Grid1D::torus(128).unwrap();
        let m = pendulum_hamiltonian();
        let a = ScalarField::from_fn(g, |x| 1.0 - x.cos()).unwrap();
        let b = ScalarField::from_fn(g, |x| 0.3 * (2.0 * x).sin()).unwrap();
        let same = averaged_drift(&a, &a, &m, 4).unwrap();
        let direct = adjoint_drift(&m, &a);
        for j in 0..128 {
            assert!((same[j] - direct[j]).abs() <= 1e-14 * (1.0 + direct[j].abs()));
        }
        let mixed4 = averaged_drift(&a, &b, &m, 4).unwrap();
        let mixed16 = averaged_drift(&a, &b, &m, 16).unwrap();
        let (da, db) = (central_gradient(&a), central_gradient(&b));
        for j in 0..128 {
            assert!((mixed4[j] - 0.5 * (da[j] + db[j])).abs() < 1e-14);
            assert!((mixed4[j] - mixed16[j]).abs() < 1e-12);
        }
        assert!(averaged_drift(&a, &b, &m, 3).is_err());
    }

    #[test]
    fn entropy_closed_forms() {
        let g = Grid1D::torus(256).unwrap();
        let uniform = DensityField::uniform(g);
        assert!((entropy_diagnostic(&uniform) - (2.0 * PI).ln()).abs() < 1e-12);
        let point = DensityField::point_mass(g, 17).unwrap();
        assert!((entropy_diagnostic(&point) - g.h().ln().abs()).abs() < 1e-12);
    }
}
