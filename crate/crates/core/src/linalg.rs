//! Symmetric tridiagonal matrices: eigenvalues by Sturm bisection, LDLᵀ
//! factorization, solves and log-determinants.

use crate::error::{Error, Result};
use crate::prelude::*;

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The k-th smallest eigenvalue (0-based) of the symmetric tridiagonal matrix
/// with diagonal `diag` and off-diagonal `off`.
pub fn tridiag_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    assert!(off.len() + 1 == diag.len() && k < diag.len());
    let (mut lo, mut hi) = gershgorin(diag, off);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All eigenvalues, ascending.
pub fn tridiag_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    (0..diag.len()).map(|k| tridiag_eigenvalue(diag, off, k)).collect()
}

/// LDLᵀ factorization of a symmetric positive definite tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagLdl {
    pivots: Vec<f64>,
    mult: Vec<f64>,
}

impl TridiagLdl {
    /// Fails when a leading principal minor is not positive.
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        assert!(n >= 1 && off.len() + 1 == n);
        let mut pivots = Vec::with_capacity(n);
        let mut mult = Vec::with_capacity(n.saturating_sub(1));
        let mut d = diag[0];
        for i in 0..n {
            if i > 0 {
                let l = off[i - 1] / pivots[i - 1];
                mult.push(l);
                d = diag[i] - l * off[i - 1];
            }
            if !(d > 0.0) {
                return Err(Error::numerical(format!("matrix not positive definite (pivot {i} = {d})")));
            }
            pivots.push(d);
        }
        Ok(TridiagLdl { pivots, mult })
    }

    pub fn log_det(&self) -> f64 {
        self.pivots.iter().map(|d| d.ln()).sum()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivots.len();
        let mut y = rhs.to_vec();
        for i in 1..n {
            y[i] -= self.mult[i - 1] * y[i - 1];
        }
        for (yi, p) in y.iter_mut().zip(&self.pivots) {
            *yi /= p;
        }
        for i in (0..n - 1).rev() {
            y[i] -= self.mult[i] * y[i + 1];
        }
        y
    }
}
