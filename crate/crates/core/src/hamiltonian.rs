//! Tonelli Hamiltonians `H(x, p)` with analytic momentum derivatives and
//! their Legendre-dual Lagrangians.
//!
//! Separable models `p²/2 + V(x)` carry a closed-form Lagrangian
//! `v²/2 - V(x)`. General models supply `H`, `∂_p H` and `∂²_pp H` as
//! closures; their Lagrangian is obtained by golden-section maximisation of
//! `v p - H(x, p)`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Momentum range over which the convexity bound is sampled.
pub const CONVEXITY_MOMENTUM_RANGE: f64 = 10.0;

const GOLDEN_TOL: f64 = 1e-10;

#[derive(Clone)]
pub enum Potential {
    Function(Fn1),
    /// Node samples on a periodic grid, linearly interpolated between nodes.
    Samples(ScalarField),
}

impl Potential {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Function(f) => f(x),
            Potential::Samples(field) => {
                let g = field.grid();
                let s = x.rem_euclid(g.length()) / g.h();
                let j = (s.floor() as usize) % g.n();
                let t = s - s.floor();
                let v = field.values();
                (1.0 - t) * v[j] + t * v[g.next(j)]
            }
        }
    }
}

#[derive(Clone)]
enum Kind {
    Separable(Potential),
    General { h: Fn2, dhdp: Fn2, d2hdp2: Fn2 },
}

/// A Hamiltonian together with its derivatives in `p` and its Lagrangian.
#[derive(Clone)]
pub struct HamiltonianModel {
    name: String,
    kind: Kind,
    critical_value: Option<f64>,
}

impl fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("name", &self.name)
            .field("separable", &self.is_separable())
            .field("critical_value", &self.critical_value)
            .finish()
    }
}

/// `H(x, p) = p²/2 + cos x - 1`.
pub fn pendulum_hamiltonian() -> HamiltonianModel {
    HamiltonianModel {
        name: "pendulum".into(),
        kind: Kind::Separable(Potential::Function(Arc::new(|x: f64| x.cos() - 1.0))),
        critical_value: Some(0.0),
    }
}

/// `H(x, p) = p²/2`.
pub fn flat_hamiltonian() -> HamiltonianModel {
    HamiltonianModel {
        name: "flat".into(),
        kind: Kind::Separable(Potential::Function(Arc::new(|_| 0.0))),
        critical_value: Some(0.0),
    }
}

/// `H(x, p) = p²/2 + V(x)` for a closure potential.
///
/// `V` is probed at 1024 points of `[0, 2π)`; a non-finite sample is
/// rejected. The critical value is left unset.
pub fn separable_hamiltonian(
    v: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<HamiltonianModel> {
    let probe = Grid1D::torus(1024)?;
    if let Some(index) = probe.nodes().position(|x| !v(x).is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(HamiltonianModel {
        name: "separable".into(),
        kind: Kind::Separable(Potential::Function(Arc::new(v))),
        critical_value: None,
    })
}

/// `H(x, p) = p²/2 + V(x)` with `V` given by node samples.
///
/// For a mechanical Hamiltonian the critical value is `max V`, which is
/// recorded from the samples.
pub fn separable_from_samples(v: ScalarField) -> HamiltonianModel {
    let c = v.max();
    HamiltonianModel {
        name: "separable".into(),
        kind: Kind::Separable(Potential::Samples(v)),
        critical_value: Some(c),
    }
}

/// A general Hamiltonian from closures for `H`, `∂_p H` and `∂²_pp H`.
pub fn convex_hamiltonian(
    name: &str,
    h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    dhdp: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    d2hdp2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
) -> HamiltonianModel {
    HamiltonianModel {
        name: name.into(),
        kind: Kind::General {
            h: Arc::new(h),
            dhdp: Arc::new(dhdp),
            d2hdp2: Arc::new(d2hdp2),
        },
        critical_value: None,
    }
}

impl HamiltonianModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_critical_value(mut self, c: f64) -> Self {
        self.critical_value = Some(c);
        self
    }

    /// `c(H)` if known for this model.
    pub fn critical_value(&self) -> Option<f64> {
        self.critical_value
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.kind, Kind::Separable(_))
    }

    /// `V(x)` for separable models.
    pub fn potential(&self, x: f64) -> Option<f64> {
        match &self.kind {
            Kind::Separable(v) => Some(v.eval(x)),
            Kind::General { .. } => None,
        }
    }

    #[inline]
    pub fn h(&self, x: f64, p: f64) -> f64 {
        match &self.kind {
            Kind::Separable(v) => 0.5 * p * p + v.eval(x),
            Kind::General { h, .. } => h(x, p),
        }
    }

    #[inline]
    pub fn dhdp(&self, x: f64, p: f64) -> f64 {
        match &self.kind {
            Kind::Separable(_) => p,
            Kind::General { dhdp, .. } => dhdp(x, p),
        }
    }

    #[inline]
    pub fn d2hdp2(&self, x: f64, p: f64) -> f64 {
        match &self.kind {
            Kind::Separable(_) => 1.0,
            Kind::General { d2hdp2, .. } => d2hdp2(x, p),
        }
    }

    /// `L(x, v) = max_p (v p - H(x, p))`.
    pub fn lagrangian(&self, x: f64, v: f64) -> f64 {
        match &self.kind {
            Kind::Separable(pot) => 0.5 * v * v - pot.eval(x),
            Kind::General { .. } => {
                let p = self.legendre_momentum(x, v);
                v * p - self.h(x, p)
            }
        }
    }

    /// Maximiser of `p ↦ v p - H(x, p)` by golden-section search on a
    /// bracket grown until `∂_p H` straddles `v`.
    fn legendre_momentum(&self, x: f64, v: f64) -> f64 {
        let mut lo = -1.0;
        let mut hi = 1.0;
        while self.dhdp(x, lo) > v {
            lo *= 2.0;
        }
        while self.dhdp(x, hi) < v {
            hi *= 2.0;
        }
        let objective = |p: f64| v * p - self.h(x, p);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = lo;
        let mut b = hi;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = objective(c);
        let mut fd = objective(d);
        while (b - a).abs() > GOLDEN_TOL * (1.0 + a.abs().max(b.abs())) {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = objective(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = objective(d);
            }
        }
        0.5 * (a + b)
    }

    /// Smallest sampled `∂²_pp H` over `n_x` positions and `|p| ≤ 10`.
    pub fn min_convexity(&self, n_x: usize, n_p: usize) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..n_x {
            let x = TAU * i as f64 / n_x as f64;
            for k in 0..=n_p {
                let p = CONVEXITY_MOMENTUM_RANGE * (2.0 * k as f64 / n_p as f64 - 1.0);
                m = m.min(self.d2hdp2(x, p));
            }
        }
        m
    }

    /// Largest sampled `|H(x,p) - H(-x,-p)|` and `|H(x,p) - H(2π-x,-p)|`,
    /// the reflection symmetry the half-interval Neumann solver relies on.
    pub fn reflection_asymmetry(&self, n_x: usize, p_max: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n_x {
            let x = TAU * i as f64 / n_x as f64;
            for k in 0..=8 {
                let p = p_max * (k as f64 / 4.0 - 1.0);
                let base = self.h(x, p);
                worst = worst
                    .max((base - self.h(-x, -p)).abs())
                    .max((base - self.h(TAU - x, -p)).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn duality_gap(m: &HamiltonianModel, x: f64, p: f64) -> f64 {
        let v = m.dhdp(x, p);
        (m.lagrangian(x, v) + m.h(x, p) - p * v).abs()
    }

    fn quartic() -> HamiltonianModel {
        // p²/2 + p⁴/12 + sin x: strictly convex, non-separable Lagrangian.
        convex_hamiltonian(
            "quartic",
            |x, p| 0.5 * p * p + p.powi(4) / 12.0 + x.sin(),
            |_, p| p + p.powi(3) / 3.0,
            |_, p| 1.0 + p * p,
        )
    }

    #[test]
    fn pendulum_values() {
        let m = pendulum_hamiltonian();
        assert_eq!(m.h(0.0, 0.0), 0.0);
        assert_eq!(m.h(PI, 0.0), -2.0);
        assert_eq!(m.lagrangian(0.0, 0.0), 0.0);
        assert_eq!(m.dhdp(1.3, 0.7), 0.7);
        assert_eq!(m.d2hdp2(1.3, 0.7), 1.0);
        assert_eq!(m.critical_value(), Some(0.0));
    }

    #[test]
    fn separable_examples() {
        let flat = separable_hamiltonian(|_| 0.0).unwrap();
        assert_eq!(flat.h(0.4, 3.0), 4.5);
        let sine = separable_hamiltonian(f64::sin).unwrap();
        assert!((sine.h(FRAC_PI_2, 0.0) - 1.0).abs() < 1e-15);
        let as_pendulum = separable_hamiltonian(|x| x.cos() - 1.0).unwrap();
        let pendulum = pendulum_hamiltonian();
        for &(x, p) in &[(0.0, 0.0), (1.0, -2.0), (PI, 0.5), (5.0, 3.0)] {
            assert_eq!(as_pendulum.h(x, p), pendulum.h(x, p));
            assert_eq!(as_pendulum.lagrangian(x, p), pendulum.lagrangian(x, p));
        }
    }

    #[test]
    fn rejects_non_finite_potential() {
        assert!(separable_hamiltonian(|x| 1.0 / (x - x)).is_err());
    }

    #[test]
    fn sampled_potential_is_exact_at_nodes() {
        let g = Grid1D::torus(64).unwrap();
        let v = ScalarField::from_fn(g, |x| x.cos() - 1.0).unwrap();
        let m = separable_from_samples(v);
        for j in [0, 5, 32, 63] {
            assert!((m.potential(g.x(j)).unwrap() - (g.x(j).cos() - 1.0)).abs() < 1e-15);
        }
        assert_eq!(m.critical_value(), Some(0.0));
    }

    #[test]
    fn legendre_duality_holds() {
        let models = [pendulum_hamiltonian(), flat_hamiltonian(), quartic()];
        for m in &models {
            for i in 0..16 {
                let x = TAU * i as f64 / 16.0;
                for k in -10..=10 {
                    let p = k as f64 * 0.7;
                    assert!(duality_gap(m, x, p) <= 1e-10, "{} at ({x}, {p})", m.name());
                }
            }
        }
    }

    #[test]
    fn convexity_is_sampled_positive() {
        assert_eq!(pendulum_hamiltonian().min_convexity(16, 20), 1.0);
        assert!(quartic().min_convexity(16, 20) >= 1.0);
    }

    #[test]
    fn pendulum_is_reflection_symmetric() {
        assert!(pendulum_hamiltonian().reflection_asymmetry(64, 3.0) < 1e-12);
        assert!(quartic().reflection_asymmetry(64, 3.0) > 0.1);
    }
}
