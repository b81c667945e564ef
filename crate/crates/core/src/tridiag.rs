//! Cyclic tridiagonal systems.
//!
//! Row `j` reads `sub[j] x_{j-1} + diag[j] x_j + sup[j] x_{j+1}` with
//! periodic wrap, so `sub[0]` and `sup[n-1]` are the corner entries.
//! Solves use the Thomas algorithm on a modified tridiagonal matrix and a
//! Sherman–Morrison correction for the corners.

use crate::error::{Error, Result};

/// Pivots smaller than this multiple of the row scale are treated as zero.
const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if sub.len() != n || sup.len() != n {
            return Err(Error::InvalidArgument(format!(
                "band lengths {} / {} / {} differ",
                sub.len(),
                n,
                sup.len()
            )));
        }
        if n < 3 {
            return Err(Error::InvalidArgument(format!(
                "cyclic system needs at least 3 rows, got {n}"
            )));
        }
        Ok(Self { sub, diag, sup })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            sub: vec![0.0; n],
            diag: vec![1.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let jm = if j == 0 { n - 1 } else { j - 1 };
                let jp = if j + 1 == n { 0 } else { j + 1 };
                self.sub[j] * x[jm] + self.diag[j] * x[j] + self.sup[j] * x[jp]
            })
            .collect()
    }

    /// Row-major dense copy; test and diagnostics use only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for j in 0..n {
            a[j][(j + n - 1) % n] += self.sub[j];
            a[j][j] += self.diag[j];
            a[j][(j + 1) % n] += self.sup[j];
        }
        a
    }

    /// Row sums, i.e. the image of the constant vector.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.sub[j] + self.diag[j] + self.sup[j])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut sub = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for j in 0..n {
            // A[j][j-1] = sub[j]  ->  A^T[j-1][j] = sup[j-1]
            sup[(j + n - 1) % n] = self.sub[j];
            sub[(j + 1) % n] = self.sup[j];
        }
        Self {
            sub,
            diag: self.diag.clone(),
            sup,
        }
    }

    pub fn factor(&self) -> Result<CyclicFactorization> {
        CyclicFactorization::new(self)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(rhs)
    }
}

/// LU factors of the corner-free tridiagonal part plus the precomputed
/// Sherman–Morrison correction, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct CyclicFactorization {
    lower: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
    beta_over_gamma: f64,
    z: Vec<f64>,
    denom: f64,
}

impl CyclicFactorization {
    fn new(m: &CyclicTridiagonal) -> Result<Self> {
        let n = m.len();
        let alpha = m.sup[n - 1];
        let beta = m.sub[0];
        // Any nonzero gamma works; -diag[0] keeps the modified pivot away
        // from cancellation.
        let gamma = if m.diag[0] != 0.0 { -m.diag[0] } else { 1.0 };
        let mut diag = m.diag.clone();
        diag[0] -= gamma;
        diag[n - 1] -= alpha * beta / gamma;

        let scale = (0..n)
            .map(|j| m.sub[j].abs() + m.diag[j].abs() + m.sup[j].abs())
            .fold(0.0, f64::max);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Singular("matrix is zero or non-finite".into()));
        }

        let mut pivots = vec![0.0; n];
        let mut lower = vec![0.0; n];
        pivots[0] = diag[0];
        for j in 1..n {
            if pivots[j - 1].abs() <= PIVOT_TOL * scale {
                return Err(Error::Singular(format!(
                    "pivot {:.3e} at row {} (scale {:.3e})",
                    pivots[j - 1],
                    j - 1,
                    scale
                )));
            }
            lower[j] = m.sub[j] / pivots[j - 1];
            pivots[j] = diag[j] - lower[j] * m.sup[j - 1];
        }
        if pivots[n - 1].abs() <= PIVOT_TOL * scale {
            return Err(Error::Singular(format!(
                "pivot {:.3e} at row {} (scale {:.3e})",
                pivots[n - 1],
                n - 1,
                scale
            )));
        }

        let mut f = Self {
            lower,
            pivots,
            upper: m.sup.clone(),
            beta_over_gamma: beta / gamma,
            z: Vec::new(),
            denom: 1.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        f.z = f.thomas(&u);
        let vz = f.z[0] + f.beta_over_gamma * f.z[n - 1];
        f.denom = 1.0 + vz;
        let zmax = f.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !f.denom.is_finite() || f.denom.abs() <= 1e-12 * (1.0 + zmax) {
            return Err(Error::Singular(format!(
                "Sherman-Morrison denominator {:.3e}",
                f.denom
            )));
        }
        Ok(f)
    }

    fn thomas(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = rhs.to_vec();
        for j in 1..n {
            y[j] -= self.lower[j] * y[j - 1];
        }
        y[n - 1] /= self.pivots[n - 1];
        for j in (0..n - 1).rev() {
            y[j] = (y[j] - self.upper[j] * y[j + 1]) / self.pivots[j];
        }
        y
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.pivots.len();
        if rhs.len() != n {
            return Err(Error::GridMismatch {
                left: n,
                right: rhs.len(),
            });
        }
        let mut y = self.thomas(rhs);
        let factor = (y[0] + self.beta_over_gamma * y[n - 1]) / self.denom;
        for (yj, zj) in y.iter_mut().zip(&self.z) {
            *yj -= factor * zj;
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular(format!(
                "non-finite solution at row {index}"
            )));
        }
        Ok(y)
    }
}
