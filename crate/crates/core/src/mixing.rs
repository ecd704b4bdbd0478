//! Mixing envelopes α_k ≤ c·r^⌊k/period⌋, geometric mixing sums, exact
//! single-coordinate α-coefficients for small finite chains, and the AR(1)
//! drift check.

use crate::error::{Error, Result};
use crate::linalg::tridiag_eigenvalue;
use crate::models::{BdChain, ModelKind};
use crate::prelude::*;
use crate::quadrature::Rule;
use crate::special::ln_gamma;

/// Certifies α_k ≤ c·r^⌊k/period⌋ for all k ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixingProfile {
    pub c: f64,
    pub r: f64,
    pub period: usize,
}

impl MixingProfile {
    pub fn new(c: f64, r: f64, period: usize) -> Result<Self> {
        if !(c >= 0.0) || !(0.0..1.0).contains(&r) || period == 0 {
            return Err(Error::param(format!(
                "mixing profile needs c ≥ 0, 0 ≤ r < 1, period ≥ 1; got c={c}, r={r}, period={period}"
            )));
        }
        Ok(MixingProfile { c, r, period })
    }

    /// The envelope value at lag k.
    pub fn envelope(&self, k: usize) -> f64 {
        let steps = (k / self.period) as i32;
        if steps == 0 {
            self.c
        } else {
            self.c * self.r.powi(steps)
        }
    }
}

/// Second-largest eigenvalue of a birth–death kernel on 0..=top, from its
/// symmetrization (a tridiagonal matrix with off-diagonal √(p(i,i+1)p(i+1,i))).
fn second_eigenvalue(chain: &BdChain, top: usize) -> f64 {
    let size = top + 1;
    let diag = vec![0.0; size];
    let off: Vec<f64> = (0..top).map(|i| (chain.birth(i) * (1.0 - chain.birth(i + 1))).sqrt()).collect();
    tridiag_eigenvalue(&diag, &off, size - 2)
}

/// Spectral envelope for the birth–death chains.
///
/// These chains alternate parity every step, so the one-step kernel has
/// eigenvalue −1. The envelope uses the two-step chain on a parity class,
/// whose second eigenvalue is λ₂², and re-indexes it to single steps as
/// α_k ≤ ¼·(λ₂²)^⌊k/2⌋. For the unbounded chain λ₂ is taken as the larger of
/// the truncated chain's value and the edge 2√(θ(1−θ)) of its continuous spectrum.
pub fn slem_profile(kind: &ModelKind, theta: f64) -> Result<MixingProfile> {
    let lambda = match *kind {
        ModelKind::FiniteBd { k } => second_eigenvalue(&kind.chain(theta)?, k),
        ModelKind::ReflectedBd => {
            let q = kind.chain(theta)?.invariant()?;
            let top = (q.len() + 8).max(64);
            let truncated = BdChain::finite(top, theta);
            second_eigenvalue(&truncated, top).max(2.0 * (theta * (1.0 - theta)).sqrt())
        }
        _ => return Err(Error::param(format!("no spectral profile for {}", kind.name()))),
    };
    let r = (lambda * lambda).clamp(0.0, 1.0);
    if !(r < 1.0) {
        return Err(Error::NonErgodic { model: kind.name(), theta });
    }
    MixingProfile::new(0.25, r, 2)
}

/// Gaussian AR(1): ρ_k = |θ|^k and α_k ≤ ρ_k / 4.
pub fn ar1_profile(theta: f64) -> Result<MixingProfile> {
    if !(theta.abs() < 1.0) {
        return Err(Error::NonErgodic { model: "ar1_gauss", theta });
    }
    MixingProfile::new(0.25, theta.abs(), 1)
}

/// The envelope appropriate to the model: spectral for birth–death chains,
/// ρ-mixing for AR(1).
pub fn model_profile(kind: &ModelKind, theta: f64) -> Result<MixingProfile> {
    match kind {
        ModelKind::Ar1Gauss => ar1_profile(theta),
        _ => slem_profile(kind, theta),
    }
}

/// Σ_{k≥0} (envelope_k)^{δ/(2+δ)} in closed form; +∞ when r ≥ 1.
pub fn mixing_sum(profile: &MixingProfile, delta: f64) -> f64 {
    if !(profile.r < 1.0) {
        return f64::INFINITY;
    }
    let u = delta / (2.0 + delta);
    let cu = profile.c.powf(u);
    if profile.r == 0.0 {
        return profile.period as f64 * cu;
    }
    profile.period as f64 * cu / (1.0 - profile.r.powf(u))
}

/// Exact single-coordinate α-coefficients at lag k for a stationary finite chain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaEvent {
    /// sup |P(A∩B) − P(A)P(B)| over A ∈ σ(X_t), B ∈ σ(X_{t+k}), given the
    /// parity class of X_t (maximized over the two classes).
    pub by_class: f64,
    /// The same supremum without conditioning; stays at ¼ for a periodic chain.
    pub unconditioned: f64,
}

pub fn alpha_event_lb(kind: &ModelKind, theta: f64, k: usize) -> Result<AlphaEvent> {
    let ModelKind::FiniteBd { k: top } = *kind else {
        return Err(Error::param("alpha_event_lb needs the finite chain"));
    };
    if top > 12 {
        return Err(Error::param(format!("state count {} too large to enumerate events", top + 1)));
    }
    let chain = kind.chain(theta)?;
    let q = chain.invariant()?;
    let size = top + 1;
    let pk = kernel_power(&chain, size, k);
    let states: Vec<usize> = (0..size).collect();
    let unconditioned = sup_over_events(&states, &q, &pk);
    let mut by_class: f64 = 0.0;
    for parity in 0..2 {
        let class: Vec<usize> = states.iter().copied().filter(|i| i % 2 == parity).collect();
        let mass: f64 = class.iter().map(|&i| q[i]).sum();
        let mut qc = vec![0.0; size];
        for &i in &class {
            qc[i] = q[i] / mass;
        }
        by_class = by_class.max(sup_over_events(&class, &qc, &pk));
    }
    Ok(AlphaEvent { by_class, unconditioned })
}

/// max over A ⊆ `domain` and B of |P(X∈A, Y∈B) − P(X∈A)P(Y∈B)| where X ~ q
/// and Y | X=i ~ pk[i]. For fixed A the best B collects the positive parts.
fn sup_over_events(domain: &[usize], q: &[f64], pk: &[Vec<f64>]) -> f64 {
    let size = q.len();
    let nu: Vec<f64> = (0..size).map(|j| domain.iter().map(|&i| q[i] * pk[i][j]).sum()).collect();
    let mut best: f64 = 0.0;
    for mask in 1u32..(1u32 << domain.len()) {
        let mut d = vec![0.0; size];
        for (bit, &i) in domain.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                for j in 0..size {
                    d[j] += q[i] * (pk[i][j] - nu[j]);
                }
            }
        }
        best = best.max(d.iter().map(|v| v.max(0.0)).sum());
    }
    best
}

fn kernel_power(chain: &BdChain, size: usize, k: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; size]; size];
    for (i, row) in p.iter_mut().enumerate() {
        let b = chain.birth(i);
        if i + 1 < size {
            row[i + 1] = b;
        }
        if i > 0 {
            row[i - 1] = 1.0 - b;
        }
    }
    let mut out: Vec<Vec<f64>> = (0..size).map(|i| (0..size).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..k {
        let mut next = vec![vec![0.0; size]; size];
        for i in 0..size {
            for l in 0..size {
                let w = out[i][l];
                if w != 0.0 {
                    for j in 0..size {
                        next[i][j] += w * p[l][j];
                    }
                }
            }
        }
        out = next;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftReport {
    /// The grid contraction is below one.
    pub holds: bool,
    /// sup over the grid of (E[V(X₁)|x] − offset) / V(x).
    pub contraction: f64,
    pub offset: f64,
    /// 2^{3+2δ}|θ|^{4+2δ}.
    pub analytic_coefficient: f64,
    pub analytic_holds: bool,
}

/// Drift check for V(x) = |x|^{4+2δ} + 1 on the Gaussian AR(1).
///
/// From |θx + W|^p ≤ 2^{p−1}(|θx|^p + |W|^p), E[V(X₁)|x] ≤ λ|x|^p + offset with
/// λ = 2^{3+2δ}|θ|^p and offset = 2^{3+2δ}E|W|^p + 1; the grid evaluation of
/// the left side uses 64-point Gauss–Hermite quadrature.
pub fn drift_check_ar1(theta: f64, delta: f64, grid: &[f64]) -> Result<DriftReport> {
    if !(delta > 0.0) {
        return Err(Error::param("drift check needs δ > 0"));
    }
    if grid.is_empty() {
        return Err(Error::param("drift check needs a nonempty grid"));
    }
    let p = 4.0 + 2.0 * delta;
    let m_p = (0.5 * p * core::f64::consts::LN_2 + ln_gamma((p + 1.0) / 2.0)? - 0.5 * core::f64::consts::PI.ln()).exp();
    let lead = 2f64.powf(3.0 + 2.0 * delta);
    let offset = lead * m_p + 1.0;
    let rule = Rule::gauss_hermite(64);
    let sqrt_pi = core::f64::consts::PI.sqrt();
    let mut contraction = f64::NEG_INFINITY;
    for &x in grid {
        let ev: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(z, w)| w * (theta * x + core::f64::consts::SQRT_2 * z).abs().powf(p))
            .sum::<f64>()
            / sqrt_pi
            + 1.0;
        if !ev.is_finite() {
            return Err(Error::Quadrature(format!("non-finite drift expectation at x = {x}")));
        }
        let v = x.abs().powf(p) + 1.0;
        contraction = contraction.max((ev - offset) / v);
    }
    let analytic_coefficient = lead * theta.abs().powf(p);
    Ok(DriftReport {
        holds: contraction < 1.0,
        contraction,
        offset,
        analytic_coefficient,
        analytic_holds: analytic_coefficient < 1.0,
    })
}

/// 201 points on [−20, 20].
pub fn default_drift_grid() -> Vec<f64> {
    (0..=200).map(|i| -20.0 + 0.2 * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_sum_closed_forms() {
        let p = MixingProfile::new(0.25, 0.0, 1).unwrap();
        assert!((mixing_sum(&p, 1.0) - 0.25f64.powf(1.0 / 3.0)).abs() < 1e-15);
        let p = MixingProfile::new(0.25, 0.5, 1).unwrap();
        let want = 0.25f64.powf(1.0 / 3.0) / (1.0 - 0.5f64.powf(1.0 / 3.0));
        assert!((mixing_sum(&p, 1.0) - want).abs() < 1e-14);
        let partial: f64 = (0..2000).map(|k| p.envelope(k).powf(1.0 / 3.0)).sum();
        assert!((partial - want).abs() < 1e-10);
        assert!(MixingProfile::new(0.25, 1.0, 1).is_err());
    }

    #[test]
    fn drift_trivial_at_zero() {
        let d = drift_check_ar1(0.0, 1.0, &default_drift_grid()).unwrap();
        assert!(d.holds && d.analytic_holds);
        let d = drift_check_ar1(0.99, 1.0, &[0.0]).unwrap();
        assert!(!d.analytic_holds);
    }

    #[test]
    fn alpha_bound_universal() {
        let kind = ModelKind::FiniteBd { k: 6 };
        for k in 0..6 {
            let a = alpha_event_lb(&kind, 0.4, k).unwrap();
            assert!(a.by_class <= 0.25 + 1e-15 && a.unconditioned <= 0.25 + 1e-15);
        }
    }
}
