//! Digamma, trigamma, log-gamma and log-beta.
//!
//! All four use upward recurrence into the asymptotic regime (x ≥ 10) and a
//! truncated Bernoulli series there. At x = 10 the first omitted term is below
//! 1e-17 relative, so the results are good to a few ulps away from zeros.

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::prelude::*;

const ASYMPTOTIC_FROM: f64 = 10.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain { what: "digamma", value: x });
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    // B_2k / (2k) for k = 1..8
    let series = r2
        * (1.0 / 12.0
            - r2 * (1.0 / 120.0
                - r2 * (1.0 / 252.0
                    - r2 * (1.0 / 240.0
                        - r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0 - r2 * (1.0 / 12.0 - r2 * 3617.0 / 8160.0)))))));
    acc + x.ln() - 0.5 * r - series
}

/// ψ'(x) for x > 0.
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain { what: "trigamma", value: x });
    }
    Ok(trigamma_unchecked(x))
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    let series = r
        + 0.5 * r2
        + r * r2
            * (1.0 / 6.0
                - r2 * (1.0 / 30.0
                    - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0 - r2 * (5.0 / 66.0 - r2 * (691.0 / 2730.0 - r2 * 7.0 / 6.0))))));
    acc + series
}

/// Remainder of Stirling's formula: ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π], x ≥ 10.
fn stirling_correction(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0
            - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0 - r2 * (691.0 / 360_360.0 - r2 / 156.0))))))
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain { what: "ln_gamma", value: x });
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x >= ASYMPTOTIC_FROM {
        return (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_correction(x);
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < ASYMPTOTIC_FROM {
        prod *= shifted;
        shifted += 1.0;
    }
    ln_gamma_unchecked(shifted) - prod.ln()
}

/// ln B(a, b) for a, b > 0.
pub fn log_beta_fn(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain { what: "log_beta_fn", value: v });
        }
    }
    Ok(log_beta_unchecked(a, b))
}

pub(crate) fn log_beta_unchecked(a: f64, b: f64) -> f64 {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    let s = p + q;
    if p >= ASYMPTOTIC_FROM {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(s);
        -0.5 * q.ln() + HALF_LN_2PI + corr + (p - 0.5) * (p / s).ln() + q * (-p / s).ln_1p()
    } else if q >= ASYMPTOTIC_FROM {
        let corr = stirling_correction(q) - stirling_correction(s);
        ln_gamma_unchecked(p) + corr + p - p * s.ln() + (q - 0.5) * (-p / s).ln_1p()
    } else {
        ln_gamma_unchecked(p) + ln_gamma_unchecked(q) - ln_gamma_unchecked(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn digamma_at_one_is_minus_euler_gamma() {
        let v = digamma(1.0).unwrap();
        assert!((v + EULER_GAMMA).abs() <= 1e-15, "{v}");
    }

    #[test]
    fn digamma_recurrence() {
        for &x in &[0.01, 0.3, 1.0, 2.5, 9.99, 10.0, 77.7] {
            let lhs = digamma(x + 1.0).unwrap();
            let rhs = digamma(x).unwrap() + 1.0 / x;
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn digamma_bracketing_at_five() {
        let v = digamma(5.0).unwrap();
        let l5 = 5f64.ln();
        assert!(l5 - 0.2 < v && v < l5 - 0.1);
    }

    #[test]
    fn digamma_rejects_non_positive() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
        assert!(digamma(f64::NAN).is_err());
    }

    #[test]
    fn trigamma_known_values() {
        // ψ'(1) = π²/6, ψ'(1/2) = π²/2
        let pi2 = core::f64::consts::PI * core::f64::consts::PI;
        assert!((trigamma(1.0).unwrap() - pi2 / 6.0).abs() < 1e-14);
        assert!((trigamma(0.5).unwrap() - pi2 / 2.0).abs() < 1e-13);
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut fact = 1.0f64;
        for k in 1..30u32 {
            let v = ln_gamma(k as f64 + 1.0).unwrap();
            fact *= k as f64;
            assert!((v - fact.ln()).abs() <= 1e-13 * fact.ln().max(1.0), "k={k}");
        }
        let half = ln_gamma(0.5).unwrap();
        assert!((half - 0.5 * core::f64::consts::PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_beta_small_cases() {
        assert!(log_beta_fn(1.0, 1.0).unwrap().abs() < 1e-14);
        let v = log_beta_fn(2.0, 3.0).unwrap();
        assert!((v - (1.0f64 / 12.0).ln()).abs() < 1e-14);
        assert!(log_beta_fn(0.0, 1.0).is_err());
    }

    #[test]
    fn log_beta_branches_agree() {
        // the large-argument branches against the plain ln Γ sum
        for &(a, b) in &[(12.5, 40.0), (3.0, 55.0), (1000.0, 2000.0), (0.7, 11.0)] {
            let direct = ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b);
            let v = log_beta_fn(a, b).unwrap();
            assert!((v - direct).abs() <= 1e-12 * direct.abs(), "({a},{b}): {v} vs {direct}");
            assert_eq!(v, log_beta_fn(b, a).unwrap());
        }
    }
}
