//! Beta and scaled-Beta laws: the prior and variational family over θ.

use core::ops::Add;

use crate::error::{Error, Result};
use crate::prelude::*;
use crate::quadrature::{beta_log_pdf, expect_beta, Tolerance};
use crate::special::{digamma_unchecked as psi, log_beta_unchecked, trigamma_unchecked as psi1};

/// A value together with its partial derivatives in the two shape parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShapeGrad {
    pub value: f64,
    pub da: f64,
    pub db: f64,
}

impl Add for ShapeGrad {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ShapeGrad { value: self.value + o.value, da: self.da + o.da, db: self.db + o.db }
    }
}

impl ShapeGrad {
    pub const fn constant(value: f64) -> Self {
        ShapeGrad { value, da: 0.0, db: 0.0 }
    }

    pub fn scale(self, k: f64) -> Self {
        ShapeGrad { value: k * self.value, da: k * self.da, db: k * self.db }
    }

    fn swap(self) -> Self {
        ShapeGrad { value: self.value, da: self.db, db: self.da }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaLaw {
    pub a: f64,
    pub b: f64,
}

impl BetaLaw {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::param(format!("Beta shapes must be positive, got ({a}, {b})")));
        }
        Ok(BetaLaw { a, b })
    }

    pub fn uniform() -> Self {
        BetaLaw { a: 1.0, b: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }

    pub fn log_norm(&self) -> f64 {
        log_beta_unchecked(self.a, self.b)
    }

    pub fn log_pdf(&self, t: f64) -> f64 {
        beta_log_pdf(self.a, self.b, self.log_norm(), t)
    }

    /// E[ln t] = ψ(a) − ψ(a+b).
    pub fn mean_log(&self) -> ShapeGrad {
        let s = self.a + self.b;
        let t1 = psi1(s);
        ShapeGrad { value: psi(self.a) - psi(s), da: psi1(self.a) - t1, db: -t1 }
    }

    /// E[ln(1 − t)] = ψ(b) − ψ(a+b).
    pub fn mean_log1m(&self) -> ShapeGrad {
        self.swapped().mean_log().swap()
    }

    /// E[t].
    pub fn mean_grad(&self) -> ShapeGrad {
        let s = self.a + self.b;
        ShapeGrad { value: self.a / s, da: self.b / (s * s), db: -self.a / (s * s) }
    }

    /// E[t²] = a(a+1) / ((a+b)(a+b+1)).
    pub fn second_moment_grad(&self) -> ShapeGrad {
        let (a, b) = (self.a, self.b);
        let s = a + b;
        let v = a * (a + 1.0) / (s * (s + 1.0));
        let dlog_common = -1.0 / s - 1.0 / (s + 1.0);
        ShapeGrad { value: v, da: v * (1.0 / a + 1.0 / (a + 1.0) + dlog_common), db: v * dlog_common }
    }

    fn swapped(&self) -> BetaLaw {
        BetaLaw { a: self.b, b: self.a }
    }

    /// E[ln(1 + s·t)] for |s| < 1 as the series Σ (−1)^{k+1} s^k E[t^k] / k.
    fn mean_log1p_series(&self, s: f64) -> ShapeGrad {
        debug_assert!(s.abs() < 1.0);
        let (a, b) = (self.a, self.b);
        let mut moment = 1.0; // E[t^k]
        let mut dlog_a = 0.0; // ∂ ln E[t^k] / ∂a
        let mut dlog_b = 0.0;
        let mut pow = 1.0;
        let mut out = ShapeGrad::default();
        for k in 1..200_000usize {
            let j = (k - 1) as f64;
            moment *= (a + j) / (a + b + j);
            dlog_a += 1.0 / (a + j) - 1.0 / (a + b + j);
            dlog_b -= 1.0 / (a + b + j);
            pow *= -s;
            let coef = -pow / k as f64;
            let term = coef * moment;
            out.value += term;
            out.da += term * dlog_a;
            out.db += term * dlog_b;
            if term.abs() <= 1e-18 * out.value.abs().max(1e-300) && (pow.abs() / k as f64) < 1e-17 {
                break;
            }
            if pow.abs() < 1e-300 || moment < 1e-300 {
                break;
            }
        }
        out
    }

    /// E[ln(u + v·t)] with shape gradient, exact where u + v·t > 0 on (0, 1).
    pub fn mean_log_affine(&self, u: f64, v: f64) -> Result<ShapeGrad> {
        let end = u + v;
        if v == 0.0 {
            return if u > 0.0 {
                Ok(ShapeGrad::constant(u.ln()))
            } else {
                Err(Error::Domain { what: "mean_log_affine", value: u })
            };
        }
        if u == 0.0 && v > 0.0 {
            let g = self.mean_log();
            return Ok(ShapeGrad { value: g.value + v.ln(), ..g });
        }
        if end == 0.0 && u > 0.0 {
            let g = self.mean_log1m();
            return Ok(ShapeGrad { value: g.value + u.ln(), ..g });
        }
        if !(u > 0.0 && end > 0.0) {
            return Err(Error::Domain { what: "mean_log_affine", value: if u <= 0.0 { u } else { end } });
        }
        let s_left = v / u;
        let s_right = -v / end;
        if s_left.abs() <= s_right.abs() {
            let g = self.mean_log1p_series(s_left);
            Ok(ShapeGrad { value: g.value + u.ln(), ..g })
        } else {
            // u + v t = (u+v)(1 + s_right (1 − t)), and 1 − t ~ Beta(b, a)
            let g = self.swapped().mean_log1p_series(s_right).swap();
            Ok(ShapeGrad { value: g.value + end.ln(), ..g })
        }
    }
}

/// A Beta law pushed through θ = m·t + c, supported on (c, m + c).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScaledBetaLaw {
    pub base: BetaLaw,
    pub m: f64,
    pub c: f64,
}

impl ScaledBetaLaw {
    pub fn new(base: BetaLaw, m: f64, c: f64) -> Result<Self> {
        if m == 0.0 || !m.is_finite() || !c.is_finite() {
            return Err(Error::param(format!("scaled Beta needs finite m ≠ 0 and finite c, got m={m}, c={c}")));
        }
        Ok(ScaledBetaLaw { base, m, c })
    }

    pub fn support(&self) -> (f64, f64) {
        let (x, y) = (self.c, self.c + self.m);
        if x < y {
            (x, y)
        } else {
            (y, x)
        }
    }

    pub fn to_unit(&self, theta: f64) -> f64 {
        (theta - self.c) / self.m
    }

    pub fn from_unit(&self, t: f64) -> f64 {
        self.m * t + self.c
    }

    pub fn mean(&self) -> f64 {
        self.m * self.base.mean() + self.c
    }

    pub fn variance(&self) -> f64 {
        self.m * self.m * self.base.variance()
    }

    pub fn log_pdf(&self, theta: f64) -> f64 {
        self.base.log_pdf(self.to_unit(theta)) - self.m.abs().ln()
    }

    pub fn same_support(&self, other: &ScaledBetaLaw) -> bool {
        self.m == other.m && self.c == other.c
    }
}

/// Either a plain Beta law on (0, 1) or a scaled one.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum FamilyLaw {
    Beta(BetaLaw),
    Scaled(ScaledBetaLaw),
}

impl FamilyLaw {
    pub fn scaled(&self) -> ScaledBetaLaw {
        match *self {
            FamilyLaw::Beta(base) => ScaledBetaLaw { base, m: 1.0, c: 0.0 },
            FamilyLaw::Scaled(s) => s,
        }
    }

    pub fn base(&self) -> BetaLaw {
        self.scaled().base
    }

    /// Same family and support, new shapes.
    pub fn with_shapes(&self, a: f64, b: f64) -> Result<FamilyLaw> {
        let base = BetaLaw::new(a, b)?;
        Ok(match *self {
            FamilyLaw::Beta(_) => FamilyLaw::Beta(base),
            FamilyLaw::Scaled(s) => FamilyLaw::Scaled(ScaledBetaLaw { base, ..s }),
        })
    }

    pub fn support(&self) -> (f64, f64) {
        self.scaled().support()
    }

    pub fn mean(&self) -> f64 {
        self.scaled().mean()
    }

    pub fn variance(&self) -> f64 {
        self.scaled().variance()
    }

    pub fn log_pdf(&self, theta: f64) -> f64 {
        self.scaled().log_pdf(theta)
    }

    pub fn same_support(&self, other: &FamilyLaw) -> bool {
        self.scaled().same_support(&other.scaled())
    }

    /// E[g(θ)] by adaptive quadrature.
    pub fn expect<G: FnMut(f64) -> f64>(&self, mut g: G, tol: Tolerance) -> Result<f64> {
        let s = self.scaled();
        expect_beta(s.base.a, s.base.b, |t| g(s.from_unit(t)), tol)
    }

    /// E[ln(u + v·θ)] with gradient in the base shapes.
    pub fn mean_log_affine(&self, u: f64, v: f64) -> Result<ShapeGrad> {
        let s = self.scaled();
        // u + v(m t + c) = (u + v c) + (v m) t
        s.base.mean_log_affine(u + v * s.c, v * s.m)
    }

    /// E[θ] with gradient.
    pub fn mean_grad(&self) -> ShapeGrad {
        let s = self.scaled();
        let g = s.base.mean_grad().scale(s.m);
        ShapeGrad { value: g.value + s.c, ..g }
    }

    /// E[θ²] with gradient.
    pub fn second_moment_grad(&self) -> ShapeGrad {
        let s = self.scaled();
        let t1 = s.base.mean_grad();
        let t2 = s.base.second_moment_grad();
        t2.scale(s.m * s.m).add(t1.scale(2.0 * s.m * s.c)).add(ShapeGrad::constant(s.c * s.c))
    }
}

impl From<BetaLaw> for FamilyLaw {
    fn from(b: BetaLaw) -> Self {
        FamilyLaw::Beta(b)
    }
}

impl From<ScaledBetaLaw> for FamilyLaw {
    fn from(s: ScaledBetaLaw) -> Self {
        FamilyLaw::Scaled(s)
    }
}

/// KL(p ‖ q) between Beta laws, closed form through ψ and ln B.
pub fn beta_kl(p: &BetaLaw, q: &BetaLaw) -> f64 {
    beta_kl_grad(p, q).value
}

/// KL(p ‖ q) and its gradient in p's shapes.
pub fn beta_kl_grad(p: &BetaLaw, q: &BetaLaw) -> ShapeGrad {
    let (a, b, c, d) = (p.a, p.b, q.a, q.b);
    if a == c && b == d {
        return ShapeGrad::default();
    }
    let s = a + b;
    let value = log_beta_unchecked(c, d) - log_beta_unchecked(a, b) + (a - c) * psi(a) + (b - d) * psi(b) + (c + d - s) * psi(s);
    let ts = psi1(s);
    let da = (a - c) * psi1(a) - (s - c - d) * ts;
    let db = (b - d) * psi1(b) - (s - c - d) * ts;
    ShapeGrad { value: value.max(0.0), da, db }
}

/// KL between scaled laws on a common support; equals the KL of their bases.
pub fn scaled_beta_kl(p: &ScaledBetaLaw, q: &ScaledBetaLaw) -> Result<f64> {
    if !p.same_support(q) {
        return Err(Error::SupportMismatch(format!("(m={}, c={}) vs (m={}, c={})", p.m, p.c, q.m, q.c)));
    }
    Ok(beta_kl(&p.base, &q.base))
}

/// KL between two family members sharing a support.
pub fn family_kl(p: &FamilyLaw, q: &FamilyLaw) -> Result<f64> {
    scaled_beta_kl(&p.scaled(), &q.scaled())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// E[ln θ]; `None` when the support reaches below zero.
    pub mean_log: Option<f64>,
    /// E[ln(1 − θ)]; `None` when the support reaches above one.
    pub mean_log1m: Option<f64>,
    pub second_moment: f64,
}

pub fn family_moments(law: &FamilyLaw) -> Moments {
    let (lo, hi) = law.support();
    let mean_log = (lo >= 0.0).then(|| law.mean_log_affine(0.0, 1.0).map(|g| g.value).ok()).flatten();
    let mean_log1m = (hi <= 1.0).then(|| law.mean_log_affine(1.0, -1.0).map(|g| g.value).ok()).flatten();
    Moments { mean: law.mean(), variance: law.variance(), mean_log, mean_log1m, second_moment: law.second_moment_grad().value }
}

/// Donsker–Varadhan gap ln ∫e^h dπ − (∫h dρ − KL(ρ, π)); zero exactly at the
/// Gibbs tilt ρ ∝ e^h π and positive otherwise.
pub fn dv_gap<H: Fn(f64) -> f64>(h: H, prior: &BetaLaw, rho: &BetaLaw) -> Result<f64> {
    let tol = Tolerance::tight();
    // shift by sup-ish value so e^h does not overflow
    let shift = [0.001, 0.25, 0.5, 0.75, 0.999].iter().map(|&t| h(t)).fold(f64::NEG_INFINITY, f64::max);
    let z = expect_beta(prior.a, prior.b, |t| (h(t) - shift).exp(), tol)?;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::numerical("∫e^h dπ is not a positive finite number"));
    }
    let log_mgf = z.ln() + shift;
    let eh = expect_beta(rho.a, rho.b, &h, tol)?;
    Ok(log_mgf - (eh - beta_kl(rho, prior)))
}

/// Gap for an arbitrary density ρ on (0, 1) given by its log-density, used
/// when ρ is the numerically normalized Gibbs tilt rather than a Beta law.
pub fn dv_gap_density<H: Fn(f64) -> f64, L: Fn(f64) -> f64>(h: H, prior: &BetaLaw, rho_log_pdf: L) -> Result<f64> {
    let tol = Tolerance::tight();
    let shift = [0.001, 0.25, 0.5, 0.75, 0.999].iter().map(|&t| h(t)).fold(f64::NEG_INFINITY, f64::max);
    let z = expect_beta(prior.a, prior.b, |t| (h(t) - shift).exp(), tol)?;
    let log_mgf = z.ln() + shift;
    let pn = prior.log_norm();
    let integrand = |t: f64| {
        let lr = rho_log_pdf(t);
        if lr == f64::NEG_INFINITY {
            return 0.0;
        }
        let lp = beta_log_pdf(prior.a, prior.b, pn, t);
        lr.exp() * (h(t) - (lr - lp))
    };
    let inner = crate::quadrature::integrate(integrand, 0.0, 1.0, tol)?;
    Ok(log_mgf - inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn kl_quadrature(p: &BetaLaw, q: &BetaLaw) -> f64 {
        let (pn, qn) = (p.log_norm(), q.log_norm());
        expect_beta(p.a, p.b, |t| beta_log_pdf(p.a, p.b, pn, t) - beta_log_pdf(q.a, q.b, qn, t), Tolerance::tight()).unwrap()
    }

    #[test]
    fn kl_identical_is_zero() {
        let p = BetaLaw::new(3.0, 4.0).unwrap();
        assert_eq!(beta_kl(&p, &p), 0.0);
    }

    #[test]
    fn kl_matches_quadrature() {
        let p = BetaLaw::new(2.0, 2.0).unwrap();
        let q = BetaLaw::uniform();
        let exact = beta_kl(&p, &q);
        assert!((exact - kl_quadrature(&p, &q)).abs() < 1e-10);
        // closed form for Beta(2,2) vs U(0,1): ln 6 − 5/3
        assert!((exact - (6f64.ln() - 5.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn kl_gradient_matches_differences() {
        let q = BetaLaw::new(2.0, 5.0).unwrap();
        for &(a, b) in &[(0.7, 3.0), (5.0, 5.0), (40.0, 12.0)] {
            let g = beta_kl_grad(&BetaLaw::new(a, b).unwrap(), &q);
            let h = 1e-6;
            let fa = |x: f64| beta_kl(&BetaLaw { a: x, b }, &q);
            let fb = |x: f64| beta_kl(&BetaLaw { a, b: x }, &q);
            let na = (fa(a + h) - fa(a - h)) / (2.0 * h);
            let nb = (fb(b + h) - fb(b - h)) / (2.0 * h);
            assert!((g.da - na).abs() < 1e-6 * na.abs().max(1.0));
            assert!((g.db - nb).abs() < 1e-6 * nb.abs().max(1.0));
        }
    }

    #[test]
    fn scaled_kl_needs_common_support() {
        let base = BetaLaw::new(2.0, 3.0).unwrap();
        let p = ScaledBetaLaw::new(base, 0.5, 0.0).unwrap();
        assert_eq!(scaled_beta_kl(&p, &p).unwrap(), 0.0);
        let q = ScaledBetaLaw::new(base, 2.0, -1.0).unwrap();
        assert!(matches!(scaled_beta_kl(&p, &q), Err(Error::SupportMismatch(_))));
        assert!(ScaledBetaLaw::new(base, 0.0, 1.0).is_err());
    }

    #[test]
    fn scaled_kl_equals_quadrature_on_support() {
        let p = ScaledBetaLaw::new(BetaLaw::new(2.0, 3.0).unwrap(), 2.0, -1.0).unwrap();
        let q = ScaledBetaLaw::new(BetaLaw::new(4.0, 4.0).unwrap(), 2.0, -1.0).unwrap();
        let oracle = integrate(
            |y| {
                let lp = p.log_pdf(y);
                if lp == f64::NEG_INFINITY {
                    0.0
                } else {
                    lp.exp() * (lp - q.log_pdf(y))
                }
            },
            -1.0,
            1.0,
            Tolerance::tight(),
        )
        .unwrap();
        let v = scaled_beta_kl(&p, &q).unwrap();
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
        assert_eq!(v, beta_kl(&p.base, &q.base));
    }

    #[test]
    fn moments_of_uniform_and_symmetric() {
        let m = family_moments(&BetaLaw::uniform().into());
        assert!((m.mean - 0.5).abs() < 1e-15);
        assert!((m.mean_log.unwrap() + 1.0).abs() < 1e-14);
        let s = ScaledBetaLaw::new(BetaLaw::new(3.0, 3.0).unwrap(), 2.0, -1.0).unwrap();
        let m = family_moments(&s.into());
        assert!(m.mean.abs() < 1e-15);
        assert!(m.mean_log.is_none());
        // 1 − θ = 2(1 − t) so E ln(1 − θ) = ln 2 + ψ(3) − ψ(6)
        let want = 2f64.ln() + psi(3.0) - psi(6.0);
        assert!((m.mean_log1m.unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn mean_log_matches_quadrature() {
        let p = BetaLaw::new(5.0, 2.0).unwrap();
        let q = expect_beta(5.0, 2.0, |t| t.ln(), Tolerance::tight()).unwrap();
        assert!((p.mean_log().value - q).abs() < 1e-10);
        assert!((p.mean_log().value - (psi(5.0) - psi(7.0))).abs() < 1e-15);
    }

    #[test]
    fn affine_log_series_matches_quadrature() {
        // ln(1 − θ) with θ on (0, ½): no digamma closed form, uses the series
        let law: FamilyLaw = ScaledBetaLaw::new(BetaLaw::new(6.0, 9.0).unwrap(), 0.5, 0.0).unwrap().into();
        let g = law.mean_log_affine(1.0, -1.0).unwrap();
        let q = law.expect(|th| (1.0 - th).ln(), Tolerance::tight()).unwrap();
        assert!((g.value - q).abs() < 1e-12, "{} vs {q}", g.value);
        // right-end expansion branch: 3 − 2.5 t
        let b = BetaLaw::new(2.5, 1.5).unwrap();
        let g = b.mean_log_affine(3.0, -2.5).unwrap();
        let q = expect_beta(2.5, 1.5, |t| (3.0 - 2.5 * t).ln(), Tolerance::tight()).unwrap();
        assert!((g.value - q).abs() < 1e-12);
        assert!(b.mean_log_affine(-0.1, 1.0).is_err());
    }

    #[test]
    fn affine_log_gradients() {
        let h = 1e-6;
        for &(u, v) in &[(1.0, -0.5), (3.0, -2.5), (0.0, 2.0), (2.0, -2.0), (0.5, 1.0)] {
            let (a, b) = (3.3, 4.1);
            let g = BetaLaw { a, b }.mean_log_affine(u, v).unwrap();
            let f = |a: f64, b: f64| BetaLaw { a, b }.mean_log_affine(u, v).unwrap().value;
            let na = (f(a + h, b) - f(a - h, b)) / (2.0 * h);
            let nb = (f(a, b + h) - f(a, b - h)) / (2.0 * h);
            assert!((g.da - na).abs() < 1e-7, "u={u} v={v}: {} vs {na}", g.da);
            assert!((g.db - nb).abs() < 1e-7);
        }
    }

    #[test]
    fn dv_gap_reduces_to_kl_for_zero_h() {
        let prior = BetaLaw::new(2.0, 3.0).unwrap();
        assert!(dv_gap(|_| 0.0, &prior, &prior).unwrap().abs() < 1e-10);
        let rho = BetaLaw::new(5.0, 1.5).unwrap();
        let gap = dv_gap(|_| 0.0, &prior, &rho).unwrap();
        assert!((gap - beta_kl(&rho, &prior)).abs() < 1e-9);
    }
}
