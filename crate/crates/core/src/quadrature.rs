//! Gauss rules and adaptive panel integration.

use core::f64::consts::PI;

use once_cell::race::OnceBox;

use crate::error::{Error, Result};
use crate::prelude::*;
use crate::special::log_beta_unchecked;

/// A quadrature rule on [-1, 1] (Legendre) or (-∞, ∞) with weight e^{-x²} (Hermite).
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// n-point Gauss–Legendre rule, nodes by Newton iteration on P_n.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Rule { nodes, weights }
    }

    /// n-point Gauss–Hermite rule for ∫ g(x) e^{-x²} dx.
    pub fn gauss_hermite(n: usize) -> Self {
        assert!(n >= 1);
        let pim4 = 1.0 / PI.powf(0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let (p1, p2) = hermite_normalized(n, z, pim4);
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            let w = 2.0 / (pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        // nodes come out descending
        nodes.reverse();
        weights.reverse();
        Rule { nodes, weights }
    }

    /// Σ wᵢ f(xᵢ) after mapping [-1, 1] onto [lo, hi].
    pub fn apply<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, f: &mut F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
    }
    let dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
    (p1, dp)
}

fn hermite_normalized(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

static GL64: OnceBox<Rule> = OnceBox::new();
static GL32: OnceBox<Rule> = OnceBox::new();

pub fn gl64() -> &'static Rule {
    GL64.get_or_init(|| Box::new(Rule::gauss_legendre(64)))
}

pub fn gl32() -> &'static Rule {
    GL32.get_or_init(|| Box::new(Rule::gauss_legendre(32)))
}

/// Acceptance thresholds for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-10, rel: 1e-12, max_depth: 40 }
    }
}

impl Tolerance {
    pub fn tight() -> Self {
        Tolerance { abs: 1e-13, rel: 1e-13, max_depth: 45 }
    }
}

/// Adaptive bisection with a 64-point Gauss–Legendre rule on every panel.
///
/// A panel is accepted when the two-halves estimate agrees with the
/// whole-panel estimate to within its share of `abs` or to `rel` relative.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite interval [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let rule = gl64();
    let total = (hi - lo).abs();
    let mut stack: Vec<(f64, f64, f64, u32)> = Vec::with_capacity(64);
    let whole = rule.apply(lo, hi, &mut f);
    stack.push((lo, hi, whole, 0));
    let mut acc = 0.0;
    while let Some((a, b, est, depth)) = stack.pop() {
        let mid = 0.5 * (a + b);
        let left = rule.apply(a, mid, &mut f);
        let right = rule.apply(mid, b, &mut f);
        let refined = left + right;
        if !refined.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        let diff = (refined - est).abs();
        let share = (b - a).abs() / total;
        if diff <= tol.abs * share || diff <= tol.rel * refined.abs() {
            acc += refined;
        } else if depth >= tol.max_depth {
            return Err(Error::Quadrature(format!("no convergence on [{a}, {b}] after {depth} bisections (diff {diff:e})")));
        } else {
            stack.push((mid, b, right, depth + 1));
            stack.push((a, mid, left, depth + 1));
        }
    }
    Ok(acc)
}

/// log of the Beta(a, b) density at t ∈ (0, 1).
pub(crate) fn beta_log_pdf(a: f64, b: f64, log_norm: f64, t: f64) -> f64 {
    if !(t > 0.0 && t < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - log_norm
}

/// ∫₀¹ g(t) Beta(t; a, b) dt.
///
/// The unit interval is split at mean ± {1, 3, 8, 20} standard deviations so
/// that concentrated laws are resolved, and the two end panels are mapped
/// exponentially to tame t^{a−1} and (1 − t)^{b−1} for shapes < 1.
pub fn expect_beta<G: FnMut(f64) -> f64>(a: f64, b: f64, g: G, tol: Tolerance) -> Result<f64> {
    expect_beta_focused(a, b, g, None, tol)
}

/// As [`expect_beta`], with extra cuts around `focus = (center, width)` for
/// integrands that peak away from the Beta law's own bulk.
pub fn expect_beta_focused<G: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    mut g: G,
    focus: Option<(f64, f64)>,
    tol: Tolerance,
) -> Result<f64> {
    let log_norm = log_beta_unchecked(a, b);
    let mean = a / (a + b);
    let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
    let mut cuts: Vec<f64> = Vec::with_capacity(18);
    let mut centers = vec![(mean, sd)];
    centers.extend(focus);
    for (center, width) in centers {
        for k in [-20.0, -8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0, 20.0] {
            let c = center + k * width;
            if c > 1e-300 && c < 1.0 - 1e-16 {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    if cuts.is_empty() {
        cuts.push(0.5);
    }
    let density = |t: f64| -> f64 {
        let lp = beta_log_pdf(a, b, log_norm, t);
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            lp.exp()
        }
    };
    let mut total = 0.0;
    let first = cuts[0];
    // t = first·e^{-u}: the t^{a-1} end becomes e^{-a u}, smooth for any a > 0
    let u_max = (40.0 / a).min(700.0);
    total += integrate(
        |u| {
            let t = first * (-u).exp();
            let d = density(t);
            if d == 0.0 {
                0.0
            } else {
                t * d * g(t)
            }
        },
        0.0,
        u_max,
        tol,
    )?;
    for w in cuts.windows(2) {
        total += integrate(
            |t| {
                let d = density(t);
                if d == 0.0 {
                    0.0
                } else {
                    d * g(t)
                }
            },
            w[0],
            w[1],
            tol,
        )?;
    }
    let span = 1.0 - *cuts.last().unwrap();
    let u_max = (40.0 / b).min(700.0);
    total += integrate(
        |u| {
            // the density is evaluated from s itself: 1 − s rounds to 1 long
            // before s^{b−1} becomes negligible when b < 1
            let s = span * (-u).exp();
            let t = (1.0 - s).min(1.0 - f64::EPSILON / 2.0);
            let d = ((a - 1.0) * (-s).ln_1p() + (b - 1.0) * s.ln() - log_norm).exp();
            if d == 0.0 {
                0.0
            } else {
                s * d * g(t)
            }
        },
        0.0,
        u_max,
        tol,
    )?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let rule = Rule::gauss_legendre(16);
        // degree 31 is exact for 16 points
        let v = rule.apply(0.0, 1.0, &mut |x: f64| 32.0 * x.powi(31));
        assert!((v - 1.0).abs() < 1e-13);
        let wsum: f64 = gl64().weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_rule_moments() {
        let rule = Rule::gauss_hermite(40);
        let sqrt_pi = PI.sqrt();
        let m0: f64 = rule.weights.iter().sum();
        assert!((m0 - sqrt_pi).abs() < 1e-13);
        // E[W^6] = 15 for W ~ N(0,1)
        let m6: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * (2f64.sqrt() * x).powi(6)).sum::<f64>() / sqrt_pi;
        assert!((m6 - 15.0).abs() < 1e-11, "{m6}");
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = integrate(|x| (-(x - 0.3) * (x - 0.3) * 1e6).exp(), 0.0, 1.0, Tolerance::default()).unwrap();
        let exact = (PI / 1e6).sqrt();
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn beta_expectations() {
        // E[t] for Beta(2, 5) = 2/7; a concentrated law; a law with shapes < 1
        let m = expect_beta(2.0, 5.0, |t| t, Tolerance::default()).unwrap();
        assert!((m - 2.0 / 7.0).abs() < 1e-12);
        let m = expect_beta(1228.8, 2867.2, |t| t, Tolerance::default()).unwrap();
        assert!((m - 0.3).abs() < 1e-12);
        let one = expect_beta(0.4, 0.7, |_| 1.0, Tolerance::default()).unwrap();
        assert!((one - 1.0).abs() < 1e-8, "{one}");
    }
}
