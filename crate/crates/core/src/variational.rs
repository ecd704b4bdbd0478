//! Tempered posteriors and KL-VB fitting over the Beta / scaled-Beta family.
//!
//! The objective is F(ρ) = α·E_ρ[r_n(θ, θ0)] + KL(ρ ‖ π), which differs from
//! KL(ρ ‖ π_{n,α}) by the log-normalizer only. E_ρ[r_n] is closed form for
//! every model: birth–death paths through E ln θ and E ln(1 − θ), AR(1)
//! through E θ and E θ², and the invariant-law terms through E ln of affine
//! maps of θ. The one exception is ln Z(θ) of the finite chain's invariant
//! law, which is integrated numerically with a score-function gradient.

use core::ops::Add;

use crate::beta::{beta_kl_grad, BetaLaw, FamilyLaw, ShapeGrad};
use crate::error::{Error, Result};
use crate::models::{
    finite_log_normalizer, invariant_log_form, invariant_logdensity, loglik_ratio_between, path_loglik, InitMode, ModelKind,
    SuffStats, Trajectory,
};
use crate::optimize::{bfgs, BfgsOptions};
use crate::prelude::*;
use crate::quadrature::{expect_beta, expect_beta_focused, Tolerance};
use crate::special::digamma_unchecked as psi;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const GRID_POINTS: usize = 2001;

/// Data and settings that define one tempered posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct VbProblem {
    pub model: ModelKind,
    pub traj: Trajectory,
    pub alpha: f64,
    pub prior: FamilyLaw,
    pub mode: InitMode,
    /// Reference law of r_n(θ, θ0) = log p_ref − log p_θ. It shifts F by a
    /// constant and so does not move the minimizer.
    pub source: ModelKind,
    pub theta0: f64,
}

impl VbProblem {
    pub fn new(model: ModelKind, traj: Trajectory, alpha: f64, prior: FamilyLaw, theta0: f64) -> Self {
        VbProblem { model, traj, alpha, prior, mode: InitMode::Shared, source: model, theta0 }
    }

    pub fn with_mode(mut self, mode: InitMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_source(mut self, source: ModelKind) -> Self {
        self.source = source;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param(format!("α = {} outside (0, 1]", self.alpha)));
        }
        self.model.validate()?;
        self.source.check_theta(self.theta0)?;
        let (lo, hi) = self.model.theta_range();
        let (plo, phi) = self.prior.support();
        if (plo - lo).abs() > 1e-12 || (phi - hi).abs() > 1e-12 {
            return Err(Error::SupportMismatch(format!(
                "prior on ({plo}, {phi}) but {} has θ in ({lo}, {hi})",
                self.model.name()
            )));
        }
        match (&self.traj.stats, self.model.is_birth_death()) {
            (SuffStats::BirthDeath(_), true) | (SuffStats::Ar1(_), false) => Ok(()),
            _ => Err(Error::param("trajectory does not belong to the model's state space")),
        }
    }

    /// r_n(θ, θ0) on the observed path, evaluated pointwise.
    pub fn ratio_at(&self, theta: f64) -> Result<f64> {
        loglik_ratio_between(&self.model, theta, &self.source, self.theta0, &self.traj, self.mode)
    }

    /// log p_ref(path), plus log q_ref(x0) under the invariant pair.
    fn reference_loglik(&self) -> Result<f64> {
        let mut l = path_loglik(&self.source, self.theta0, &self.traj)?;
        if self.mode == InitMode::InvariantPair {
            l += invariant_logdensity(&self.source, self.theta0, self.traj.x0())?;
        }
        Ok(l)
    }
}

/// E_ρ[log p_θ(path)] (plus E_ρ log q_θ(x0) under the invariant pair) with its
/// gradient in ρ's base shapes.
fn expected_model_loglik(p: &VbProblem, rho: &FamilyLaw) -> Result<ShapeGrad> {
    let log = || rho.mean_log_affine(0.0, 1.0);
    let log1m = || rho.mean_log_affine(1.0, -1.0);
    match (&p.traj.stats, p.model) {
        (SuffStats::BirthDeath(s), ModelKind::FiniteBd { .. } | ModelKind::ReflectedBd) => {
            let mut acc = ShapeGrad::default();
            let (u, d) = (s.ups() as f64, s.downs() as f64);
            if u > 0.0 {
                acc = acc.add(log()?.scale(u));
            }
            if d > 0.0 {
                acc = acc.add(log1m()?.scale(d));
            }
            if p.mode == InitMode::InvariantPair {
                let form = invariant_log_form(&p.model, s.x0)?;
                acc = acc.add(ShapeGrad::constant(form.konst));
                if form.c_log != 0.0 {
                    acc = acc.add(log()?.scale(form.c_log));
                }
                if form.c_log1m != 0.0 {
                    acc = acc.add(log1m()?.scale(form.c_log1m));
                }
                if form.c_log1m2 != 0.0 {
                    acc = acc.add(rho.mean_log_affine(1.0, -2.0)?.scale(form.c_log1m2));
                }
                if form.needs_normalizer {
                    let ModelKind::FiniteBd { k } = p.model else { unreachable!() };
                    acc = acc.add(expected_log_normalizer(k, rho)?.scale(-1.0));
                }
            }
            Ok(acc)
        }
        (SuffStats::Ar1(s), ModelKind::Ar1Gauss) => {
            let n = p.traj.n() as f64;
            let m1 = rho.mean_grad();
            let m2 = rho.second_moment_grad();
            // −n·½ln2π − ½(Sy2 − 2θ Sxx + θ² Sx2)
            let mut acc = ShapeGrad::constant(-n * HALF_LN_2PI - 0.5 * s.sy2).add(m1.scale(s.sxx)).add(m2.scale(-0.5 * s.sx2));
            if p.mode == InitMode::InvariantPair {
                // ½ln(1−θ²) − ½ln2π − ½(1−θ²)x0², with ln(1−θ²) = ln(1−θ) + ln(1+θ)
                let x2 = s.x0 * s.x0;
                let l1 = rho.mean_log_affine(1.0, -1.0)?;
                let l2 = rho.mean_log_affine(1.0, 1.0)?;
                acc = acc.add(l1.add(l2).scale(0.5)).add(ShapeGrad::constant(-HALF_LN_2PI - 0.5 * x2)).add(m2.scale(0.5 * x2));
            }
            Ok(acc)
        }
        _ => Err(Error::param(format!("no closed-form VB objective for {}", p.model.name()))),
    }
}

/// E_ρ[ln Z(θ)] for the finite chain, with ∂/∂a = E[(ln Z − c)(ln t − ψ(a) + ψ(a+b))]
/// and the matching expression in b.
fn expected_log_normalizer(k: usize, rho: &FamilyLaw) -> Result<ShapeGrad> {
    let s = rho.scaled();
    let (a, b) = (s.base.a, s.base.b);
    let tol = Tolerance { abs: 1e-12, rel: 1e-12, max_depth: 40 };
    let center = finite_log_normalizer(k, s.from_unit(s.base.mean()));
    let f = |t: f64| finite_log_normalizer(k, s.from_unit(t)) - center;
    let value = expect_beta(a, b, f, tol)? + center;
    let (pa, pb, pab) = (psi(a), psi(b), psi(a + b));
    let da = expect_beta(a, b, |t| f(t) * (t.ln() - pa + pab), tol)?;
    let db = expect_beta(a, b, |t| f(t) * ((-t).ln_1p() - pb + pab), tol)?;
    Ok(ShapeGrad { value, da, db })
}

fn check_family(p: &VbProblem, rho: &FamilyLaw) -> Result<()> {
    if !rho.same_support(&p.prior) {
        return Err(Error::SupportMismatch("variational law and prior live on different supports".to_string()));
    }
    Ok(())
}

/// E_ρ[r_n(θ, θ0)] with gradient in ρ's base shapes.
pub fn expected_ratio(p: &VbProblem, rho: &FamilyLaw) -> Result<ShapeGrad> {
    check_family(p, rho)?;
    let l = expected_model_loglik(p, rho)?;
    Ok(ShapeGrad::constant(p.reference_loglik()?).add(l.scale(-1.0)))
}

/// F(ρ) = α E_ρ[r_n] + KL(ρ ‖ π) with gradient in the base shapes.
pub fn vb_objective_grad(p: &VbProblem, rho: &FamilyLaw) -> Result<ShapeGrad> {
    let er = expected_ratio(p, rho)?;
    let kl = beta_kl_grad(&rho.base(), &p.prior.base());
    Ok(er.scale(p.alpha).add(kl))
}

pub fn vb_objective(p: &VbProblem, rho: &FamilyLaw) -> Result<f64> {
    Ok(vb_objective_grad(p, rho)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { grad_tol: 1e-8, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorApprox {
    pub law: FamilyLaw,
    pub alpha: f64,
    pub objective: f64,
    /// Gradient norm in (ln a, ln b) at exit.
    pub grad_norm: f64,
    pub restarts: usize,
    pub converged: bool,
}

/// Minimizes F over the family of the prior, in (ln a, ln b) by BFGS from
/// five deterministic starts.
pub fn fit_klvb(p: &VbProblem, opts: FitOptions) -> Result<PosteriorApprox> {
    p.validate()?;
    let starts = start_points(p)?;
    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        let (a, b) = (x[0].exp(), x[1].exp());
        let bad = (f64::INFINITY, vec![0.0, 0.0]);
        if !(a > 1e-8 && b > 1e-8 && a < 1e12 && b < 1e12) {
            return bad;
        }
        let Ok(rho) = p.prior.with_shapes(a, b) else { return bad };
        match vb_objective_grad(p, &rho) {
            Ok(g) if g.value.is_finite() => (g.value, vec![a * g.da, b * g.db]),
            _ => bad,
        }
    };
    let bopts = BfgsOptions { grad_tol: opts.grad_tol, max_iter: opts.max_iter };
    let mut best: Option<crate::optimize::Minimum> = None;
    for (a, b) in &starts {
        let m = bfgs(objective, &[a.ln(), b.ln()], bopts);
        if !m.value.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(cur) => {
                let scale = 1e-12 * cur.value.abs().max(1.0);
                // prefer converged runs among values that tie
                if (m.value - cur.value).abs() <= scale {
                    m.converged && !cur.converged
                } else {
                    m.value < cur.value
                }
            }
        };
        if better {
            best = Some(m);
        }
    }
    let m = best.ok_or_else(|| Error::numerical("VB objective is not finite from any start"))?;
    let law = p.prior.with_shapes(m.x[0].exp(), m.x[1].exp())?;
    Ok(PosteriorApprox {
        law,
        alpha: p.alpha,
        objective: m.value,
        grad_norm: m.grad_norm,
        restarts: starts.len(),
        converged: m.converged,
    })
}

/// Five starting shapes: flat, two concentrations around the point estimate,
/// the prior, and a moment match to the gridded tempered posterior.
fn start_points(p: &VbProblem) -> Result<Vec<(f64, f64)>> {
    let s = p.prior.scaled();
    let t_hat = s.to_unit(point_estimate(p)).clamp(0.02, 0.98);
    let mut out = vec![(1.0, 1.0), (4.0 * t_hat, 4.0 * (1.0 - t_hat)), (64.0 * t_hat, 64.0 * (1.0 - t_hat))];
    out.push((s.base.a, s.base.b));
    let (m, v) = grid_posterior(p)?.moments();
    let common = m * (1.0 - m) / v - 1.0;
    if common.is_finite() && common > 0.0 && m > 0.0 && m < 1.0 {
        out.push((m * common, (1.0 - m) * common));
    } else {
        out.push((2.0, 2.0));
    }
    Ok(out)
}

fn point_estimate(p: &VbProblem) -> f64 {
    match &p.traj.stats {
        SuffStats::BirthDeath(s) if s.ups() + s.downs() > 0 => s.ups() as f64 / (s.ups() + s.downs()) as f64,
        SuffStats::Ar1(s) if s.sx2 > 0.0 => s.sxx / s.sx2,
        _ => p.prior.mean(),
    }
}

/// The tempered posterior on an even grid of unit coordinates.
struct GridPosterior {
    t: Vec<f64>,
    w: Vec<f64>,
    /// max over the grid of −α r_n
    peak: f64,
}

impl GridPosterior {
    fn moments(&self) -> (f64, f64) {
        let total: f64 = self.w.iter().sum();
        let mean = self.t.iter().zip(&self.w).map(|(t, w)| t * w).sum::<f64>() / total;
        let var = self.t.iter().zip(&self.w).map(|(t, w)| w * (t - mean) * (t - mean)).sum::<f64>() / total;
        (mean, var)
    }
}

fn grid_posterior(p: &VbProblem) -> Result<GridPosterior> {
    let s = p.prior.scaled();
    let mut t = Vec::with_capacity(GRID_POINTS);
    let mut tilt = Vec::with_capacity(GRID_POINTS);
    let mut lw = Vec::with_capacity(GRID_POINTS);
    for i in 0..GRID_POINTS {
        let ti = (i as f64 + 0.5) / GRID_POINTS as f64;
        let theta = s.from_unit(ti);
        let h = -p.alpha * p.ratio_at(theta)?;
        t.push(ti);
        tilt.push(h);
        lw.push(h + s.log_pdf(theta));
    }
    let peak = tilt.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    let top = lw.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::numerical("tempered posterior vanishes on the whole grid"));
    }
    let w = lw.iter().map(|v| if v.is_nan() { 0.0 } else { (v - top).exp() }).collect();
    Ok(GridPosterior { t, w, peak })
}

/// Conjugate update Beta(a0 + αU, b0 + αD) of the finite chain under a
/// shared initial law.
pub fn conjugate_bd_posterior(prior: &BetaLaw, alpha: f64, ups: u64, downs: u64) -> BetaLaw {
    BetaLaw { a: prior.a + alpha * ups as f64, b: prior.b + alpha * downs as f64 }
}

/// π_{n,α}(θ) ∝ exp(−α r_n(θ, θ0)) π(θ), normalized by quadrature.
#[derive(Debug, Clone)]
pub struct TemperedPosterior {
    pub problem: VbProblem,
    pub log_normalizer: f64,
    /// (center, sd) in unit coordinates, from the gridded posterior.
    focus: (f64, f64),
}

impl TemperedPosterior {
    pub fn new(problem: VbProblem) -> Result<Self> {
        problem.validate()?;
        let grid = grid_posterior(&problem)?;
        let (m, v) = grid.moments();
        let focus = (m, v.sqrt().max(0.5 / GRID_POINTS as f64));
        let s = problem.prior.scaled();
        let shift = grid.peak;
        let mut failure = None;
        let z = expect_beta_focused(
            s.base.a,
            s.base.b,
            |t| match problem.ratio_at(s.from_unit(t)) {
                Ok(r) if r.is_nan() => 0.0,
                Ok(r) => (-problem.alpha * r - shift).exp(),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            Some(focus),
            Tolerance { abs: 1e-14, rel: 1e-12, max_depth: 40 },
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::numerical("tempered posterior normalizer is not positive"));
        }
        Ok(TemperedPosterior { problem, log_normalizer: z.ln() + shift, focus })
    }

    /// log π_{n,α}(θ); −∞ outside the open support.
    pub fn logdensity(&self, theta: f64) -> Result<f64> {
        let (lo, hi) = self.problem.prior.support();
        if !(theta > lo && theta < hi) {
            return Ok(f64::NEG_INFINITY);
        }
        let r = self.problem.ratio_at(theta)?;
        if r.is_nan() || r == f64::INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(-self.problem.alpha * r + self.problem.prior.log_pdf(theta) - self.log_normalizer)
    }

    /// ∫ g dπ_{n,α}.
    pub fn expect<G: FnMut(f64) -> f64>(&self, mut g: G) -> Result<f64> {
        let s = self.problem.prior.scaled();
        let mut failure = None;
        let v = expect_beta_focused(
            s.base.a,
            s.base.b,
            |t| {
                let theta = s.from_unit(t);
                match self.problem.ratio_at(theta) {
                    Ok(r) if r.is_nan() || r == f64::INFINITY => 0.0,
                    Ok(r) => (-self.problem.alpha * r - self.log_normalizer).exp() * g(theta),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            Some(self.focus),
            Tolerance { abs: 1e-14, rel: 1e-12, max_depth: 40 },
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// KL(ρ ‖ π_{n,α}) by direct quadrature against ρ.
    pub fn kl_from(&self, rho: &FamilyLaw) -> Result<f64> {
        let s = rho.scaled();
        let mut failure = None;
        let v = expect_beta_focused(
            s.base.a,
            s.base.b,
            |t| {
                let theta = s.from_unit(t);
                match self.logdensity(theta) {
                    Ok(l) => rho.log_pdf(theta) - l,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            Some(self.focus),
            Tolerance { abs: 1e-12, rel: 1e-12, max_depth: 40 },
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}
