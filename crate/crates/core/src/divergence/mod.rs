//! KL and α-Rényi divergences between path laws, variance of r_n and its
//! mixing bound, and posterior-averaged risk integrals.

mod gaussian;
mod transfer;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::beta::FamilyLaw;
use crate::error::{Error, Result};
use crate::mixing::MixingProfile;
use crate::models::{
    invariant, loglik_ratio_between, marginals, resolve_init, simulate_with, BdChain, Distribution, InitLaw, InitMode, ModelKind,
};
use crate::prelude::*;
use crate::quadrature::{expect_beta, gl64, Rule, Tolerance};
use crate::rng::stream;

use transfer::{log_transfer_total, InitialWeights};

/// D_α(P_θ^{(n)}, P_θ0^{(n)}) where P_θ0 is the source (data-generating) law.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathDivergenceQuery {
    pub model: ModelKind,
    /// Kind of the source law; equal to `model` except in misspecified runs.
    pub source: ModelKind,
    pub theta: f64,
    pub theta0: f64,
    pub n: usize,
    pub alpha: f64,
    pub init_mode: InitMode,
    /// Shared initial law (resolved at θ0); ignored under `InvariantPair`.
    pub init: InitLaw,
}

impl PathDivergenceQuery {
    pub fn new(model: ModelKind, theta: f64, theta0: f64, n: usize, alpha: f64, init_mode: InitMode) -> Self {
        PathDivergenceQuery { model, source: model, theta, theta0, n, alpha, init_mode, init: InitLaw::Invariant }
    }

    pub fn with_init(mut self, init: InitLaw) -> Self {
        self.init = init;
        self
    }

    pub fn with_source(mut self, source: ModelKind) -> Self {
        self.source = source;
        self
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        PathDivergenceQuery { theta, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("α = {} outside (0, 1)", self.alpha)));
        }
        if self.n < 1 {
            return Err(Error::param("horizon n must be at least 1"));
        }
        self.model.check_theta(self.theta)?;
        self.source.check_theta(self.theta0)?;
        if self.model.is_birth_death() != self.source.is_birth_death() {
            return Err(Error::param("model and source live on different state spaces"));
        }
        Ok(())
    }

    fn same_law(&self) -> bool {
        self.model == self.source && self.theta == self.theta0
    }

    fn shared_init(&self) -> Result<Distribution> {
        resolve_init(&self.source, self.theta0, &self.init)
    }
}

/// Exact D_α for birth–death models by the transfer product.
pub fn renyi_exact_finite(q: &PathDivergenceQuery) -> Result<f64> {
    q.validate()?;
    if !q.model.is_birth_death() {
        return Err(Error::param("transfer evaluation needs birth–death models"));
    }
    if q.same_law() {
        return Ok(0.0);
    }
    let model = q.model.chain(q.theta)?;
    let source = q.source.chain(q.theta0)?;
    let log_total = match q.init_mode {
        InitMode::InvariantPair => log_transfer_total(&model, &source, InitialWeights::Invariant, q.n, q.alpha)?,
        InitMode::Shared => {
            let init = q.shared_init()?;
            let masses = init.masses().ok_or_else(|| Error::param("shared initial law must be discrete"))?;
            let total: f64 = masses.iter().sum();
            let normalized: Vec<f64> = masses.iter().map(|m| m / total).collect();
            log_transfer_total(&model, &source, InitialWeights::Masses(&normalized), q.n, q.alpha)?
        }
    };
    Ok(finish(log_total, q.alpha))
}

fn finish(log_affinity: f64, alpha: f64) -> f64 {
    (log_affinity / (alpha - 1.0)).max(0.0)
}

/// Exact D_α for the Gaussian AR(1) through the tridiagonal path precisions.
pub fn renyi_exact_ar1(q: &PathDivergenceQuery) -> Result<f64> {
    q.validate()?;
    if q.model != ModelKind::Ar1Gauss || q.source != ModelKind::Ar1Gauss {
        return Err(Error::param("Gaussian evaluation needs the AR(1) model"));
    }
    if q.same_law() {
        return Ok(0.0);
    }
    let log_aff = match q.init_mode {
        InitMode::InvariantPair => gaussian::log_affinity_invariant(q.theta, q.theta0, q.n, q.alpha)?,
        InitMode::Shared => {
            let Distribution::Gaussian { mean, var } = q.shared_init()? else {
                return Err(Error::param("AR(1) shared initial law must be Gaussian"));
            };
            gaussian::log_affinity_shared(q.theta, q.theta0, q.n, q.alpha, mean, var)?
        }
    };
    Ok(finish(log_aff, q.alpha))
}

/// Exact D_α with the evaluator appropriate to the model.
pub fn renyi_exact(q: &PathDivergenceQuery) -> Result<f64> {
    if q.model.is_birth_death() {
        renyi_exact_finite(q)
    } else {
        renyi_exact_ar1(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub estimate: f64,
    pub standard_error: f64,
}

/// Initial law used when simulating the source in a query.
fn source_init(q: &PathDivergenceQuery) -> InitLaw {
    match q.init_mode {
        InitMode::InvariantPair => InitLaw::Invariant,
        InitMode::Shared => q.init.clone(),
    }
}

/// r_n(θ, θ0) on `reps` source trajectories drawn from streams of `seed`.
fn ratio_bank(q: &PathDivergenceQuery, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let init = source_init(q);
    (0..reps)
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let traj = simulate_with(&q.source, q.theta0, &init, q.n, &mut rng)?;
            loglik_ratio_between(&q.model, q.theta, &q.source, q.theta0, &traj, q.init_mode)
        })
        .collect()
}

/// Monte Carlo D_α = (α−1)⁻¹ log mean e^{−α r_n} with a delta-method error.
pub fn renyi_mc(q: &PathDivergenceQuery, reps: usize, seed: u64) -> Result<Estimate> {
    q.validate()?;
    if reps < 100 {
        return Err(Error::param("renyi_mc needs at least 100 replications"));
    }
    if q.same_law() {
        return Ok(Estimate { estimate: 0.0, standard_error: 0.0 });
    }
    let bank = ratio_bank(q, reps, seed)?;
    let logs: Vec<f64> = bank.iter().map(|r| -q.alpha * r).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::numerical("all importance weights vanished; use a smaller n or α"));
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let rf = reps as f64;
    let mean = w.iter().sum::<f64>() / rf;
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (rf - 1.0);
    let log_mean = m + mean.ln();
    let se_log = var.sqrt() / (mean * rf.sqrt());
    Ok(Estimate { estimate: log_mean / (q.alpha - 1.0), standard_error: se_log / (1.0 - q.alpha) })
}

/// Per-state one-step KL and |log-ratio|^p moments for birth–death pairs.
struct BdStepLaw {
    source: BdChain,
    model: BdChain,
}

impl BdStepLaw {
    /// Σ over the two moves of p_src · g(log p_src/p_θ).
    fn step_expect<G: Fn(f64) -> f64>(&self, x: usize, g: G) -> f64 {
        if self.source.is_forced(x) {
            return 0.0;
        }
        let (b0, b) = (self.source.birth(x), self.model.birth(x));
        let mut acc = 0.0;
        if b0 > 0.0 {
            acc += b0 * g((b0 / b).ln());
        }
        if b0 < 1.0 {
            acc += (1.0 - b0) * g(((1.0 - b0) / (1.0 - b)).ln());
        }
        acc
    }

    fn expect_over<G: Fn(f64) -> f64>(&self, masses: &[f64], g: G) -> f64 {
        masses.iter().enumerate().map(|(x, m)| if *m == 0.0 { 0.0 } else { m * self.step_expect(x, &g) }).sum()
    }
}

fn bd_pair(model: &ModelKind, theta: f64, source: &ModelKind, theta0: f64) -> Result<BdStepLaw> {
    Ok(BdStepLaw { source: source.chain(theta0)?, model: model.chain(theta)? })
}

/// The law of X_0 under the source for the given mode.
fn source_start(source: &ModelKind, theta0: f64, mode: InitMode, init: &InitLaw) -> Result<Distribution> {
    match mode {
        InitMode::InvariantPair => invariant(source, theta0),
        InitMode::Shared => resolve_init(source, theta0, init),
    }
}

fn is_stationary(source: &ModelKind, theta0: f64, start: &Distribution) -> Result<bool> {
    Ok(*start == invariant(source, theta0)?)
}

/// KL(P_θ0^{(n)} ‖ P_θ^{(n)}) = E_θ0[r_n(θ, θ0)].
pub fn kl_path(kind: &ModelKind, theta: f64, theta0: f64, n: usize, mode: InitMode, init: &InitLaw) -> Result<f64> {
    kl_path_between(kind, theta, kind, theta0, n, mode, init)
}

/// KL from a source law (kind0, θ0) to a model law (kind, θ) over n steps.
pub fn kl_path_between(
    kind: &ModelKind,
    theta: f64,
    kind0: &ModelKind,
    theta0: f64,
    n: usize,
    mode: InitMode,
    init: &InitLaw,
) -> Result<f64> {
    kind.check_theta(theta)?;
    kind0.check_theta(theta0)?;
    if kind == kind0 && theta == theta0 {
        return Ok(0.0);
    }
    let start = source_start(kind0, theta0, mode, init)?;
    let z0 = if mode == InitMode::InvariantPair { invariant_kl(kind, theta, kind0, theta0)? } else { 0.0 };
    if kind.is_birth_death() {
        let pair = bd_pair(kind, theta, kind0, theta0)?;
        let per_state = |m: &[f64]| pair.expect_over(m, |l| l);
        let masses = start.masses().ok_or_else(|| Error::param("birth–death initial law must be discrete"))?;
        let steps = if is_stationary(kind0, theta0, &start)? {
            n as f64 * per_state(masses)
        } else {
            marginals(kind0, theta0, &start, n - 1)?.iter().map(|d| per_state(d.masses().unwrap())).sum()
        };
        return Ok(steps.max(0.0) + z0);
    }
    // E[½(θ0 − θ)² X²] per step, summed over the source marginals
    let d2 = 0.5 * (theta0 - theta) * (theta0 - theta);
    let t2 = theta0 * theta0;
    let mut s = start.second_moment();
    let mut sum = 0.0;
    for _ in 0..n {
        sum += s;
        s = t2 * s + 1.0;
    }
    Ok(d2 * sum + z0)
}

/// KL between the source invariant law and the model invariant law.
fn invariant_kl(kind: &ModelKind, theta: f64, kind0: &ModelKind, theta0: f64) -> Result<f64> {
    match (invariant(kind0, theta0)?, invariant(kind, theta)?) {
        (Distribution::Gaussian { var: v0, .. }, Distribution::Gaussian { var: v, .. }) => {
            let ratio = v0 / v;
            Ok(0.5 * (ratio - 1.0 - ratio.ln()))
        }
        (Distribution::Discrete { masses: q0 }, Distribution::Discrete { .. }) => {
            let lq0 = kind0.chain(theta0)?.log_invariant_upto(q0.len() - 1)?;
            let lq = kind.chain(theta)?.log_invariant_upto(q0.len() - 1)?;
            Ok(q0
                .iter()
                .zip(lq0.iter().zip(&lq))
                .map(|(m, (a, b))| if *m == 0.0 { 0.0 } else { m * (a - b) })
                .sum::<f64>()
                .max(0.0))
        }
        _ => Err(Error::param("mismatched invariant laws")),
    }
}

/// Stationary per-step KL rate Σ_x q_src(x) KL(p_src(·|x) ‖ p_θ(·|x)).
pub fn kl_rate(kind: &ModelKind, theta: f64, kind0: &ModelKind, theta0: f64) -> Result<f64> {
    let pair = bd_pair(kind, theta, kind0, theta0)?;
    let q0 = kind0.chain(theta0)?.invariant()?;
    Ok(pair.expect_over(&q0, |l| l))
}

/// Unbiased sample variance of r_n over `reps` trajectories.
#[allow(clippy::too_many_arguments)]
pub fn var_rn_empirical(
    kind: &ModelKind,
    theta: f64,
    theta0: f64,
    n: usize,
    reps: usize,
    seed: u64,
    mode: InitMode,
    init: &InitLaw,
) -> Result<Estimate> {
    if reps < 2 {
        return Err(Error::param("variance needs at least two replications"));
    }
    let q =
        PathDivergenceQuery { model: *kind, source: *kind, theta, theta0, n, alpha: 0.5, init_mode: mode, init: init.clone() };
    q.validate()?;
    if theta == theta0 {
        return Ok(Estimate { estimate: 0.0, standard_error: 0.0 });
    }
    let bank = ratio_bank(&q, reps, seed)?;
    Ok(sample_variance(&bank))
}

/// Sample variance with the standard error of the variance estimator.
pub fn sample_variance(xs: &[f64]) -> Estimate {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
    let s2 = m2 / (r - 1.0);
    let var_s2 = (m4 - s2 * s2 * (r - 3.0) / (r - 1.0)) / r;
    Estimate { estimate: s2, standard_error: var_s2.max(0.0).sqrt() }
}

/// Right-hand side of the α-mixing variance bound for r_n(θ, θ0).
///
/// The data-generating chain is θ0 and `profile` must certify its mixing.
/// Moments C^{(i)} = E|log p_θ0(X_i|X_{i−1})/p_θ(X_i|X_{i−1})|^{2+δ} are exact
/// for birth–death models and use Gauss–Hermite quadrature for AR(1). When the
/// chain starts stationary the single-sum simplification is used; otherwise
/// the double sum, where α_{−1} (the i = j terms) is taken as the envelope at 0.
#[allow(clippy::too_many_arguments)]
pub fn var_rn_bound(
    kind: &ModelKind,
    theta: f64,
    theta0: f64,
    n: usize,
    delta: f64,
    profile: &MixingProfile,
    mode: InitMode,
    init: &InitLaw,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::param("δ must be positive"));
    }
    kind.check_theta(theta)?;
    kind.check_theta(theta0)?;
    if !(profile.r < 1.0) {
        return Ok(f64::INFINITY);
    }
    let p = 2.0 + delta;
    let u = delta / (2.0 + delta);
    let nf = n as f64;
    let scale = nf.powf(delta / 2.0);
    let start = source_start(kind, theta0, mode, init)?;
    let (d_moment, var_z0) = if mode == InitMode::InvariantPair { z0_moments(kind, theta, theta0, p)? } else { (0.0, 0.0) };
    let env = |k: isize| profile.envelope(k.max(0) as usize).powf(u);
    if is_stationary(kind, theta0, &start)? {
        let c = step_abs_moment(kind, theta, theta0, &start, p)?;
        let s0 = crate::mixing::mixing_sum(profile, delta);
        let s1 = s0 - env(0);
        let bound = nf * (4.0 / nf + 6.0 * scale * c) * s0
            + (4.0 / nf + 2.0 * scale * (c + d_moment + (c * d_moment).sqrt())) * s1
            + var_z0;
        return Ok(bound);
    }
    let laws = marginals(kind, theta0, &start, n - 1)?;
    let cs: Vec<f64> = laws.iter().map(|d| step_abs_moment(kind, theta, theta0, d, p)).collect::<Result<_>>()?;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            let lag = (i as isize - j as isize).abs() - 1;
            let (ci, cj) = (cs[i], cs[j]);
            pairs += (4.0 / nf + 2.0 * scale * (ci + cj + 2.0 * (ci * cj).sqrt())) * env(lag);
        }
    }
    let mut init_terms = 0.0;
    for (i, &ci) in cs.iter().enumerate() {
        init_terms += (4.0 / nf + 2.0 * scale * (ci + d_moment + (ci * d_moment).sqrt())) * env(i as isize - 1);
    }
    Ok(pairs + init_terms + var_z0)
}

/// E|Y|^p for one step Y = log p_θ0(X'|X) − log p_θ(X'|X) with X ~ `law`.
fn step_abs_moment(kind: &ModelKind, theta: f64, theta0: f64, law: &Distribution, p: f64) -> Result<f64> {
    match law {
        Distribution::Discrete { masses } => {
            let pair = bd_pair(kind, theta, kind, theta0)?;
            Ok(pair.expect_over(masses, |l| l.abs().powf(p)))
        }
        Distribution::Gaussian { mean, var } => {
            // Y = ½d²X² + dXW with d = θ0 − θ
            let d = theta0 - theta;
            Ok(gauss_expect2(*mean, *var, |x, w| (0.5 * d * d * x * x + d * x * w).abs().powf(p)))
        }
    }
}

/// (E|Z0|^p, Var Z0) for Z0 = log q_θ0(X0) − log q_θ(X0), X0 ~ q_θ0.
fn z0_moments(kind: &ModelKind, theta: f64, theta0: f64, p: f64) -> Result<(f64, f64)> {
    match invariant(kind, theta0)? {
        Distribution::Discrete { masses } => {
            let lq0 = kind.chain(theta0)?.log_invariant_upto(masses.len() - 1)?;
            let lq = kind.chain(theta)?.log_invariant_upto(masses.len() - 1)?;
            let z: Vec<f64> = lq0.iter().zip(&lq).map(|(a, b)| a - b).collect();
            let mean: f64 = masses.iter().zip(&z).map(|(m, v)| m * v).sum();
            let var: f64 = masses.iter().zip(&z).map(|(m, v)| m * (v - mean).powi(2)).sum();
            let abs: f64 = masses.iter().zip(&z).map(|(m, v)| m * v.abs().powf(p)).sum();
            Ok((abs, var))
        }
        Distribution::Gaussian { var: v0, .. } => {
            let a = 0.5 * ((1.0 - theta0 * theta0) / (1.0 - theta * theta)).ln();
            let b = 0.5 * (theta0 * theta0 - theta * theta);
            let abs = gauss_expect1(0.0, v0, |x| (a + b * x * x).abs().powf(p));
            // X0² = v0·χ²₁, Var χ²₁ = 2
            Ok((abs, 2.0 * b * b * v0 * v0))
        }
    }
}

fn hermite64() -> &'static Rule {
    use once_cell::race::OnceBox;
    static GH: OnceBox<Rule> = OnceBox::new();
    GH.get_or_init(|| Box::new(Rule::gauss_hermite(64)))
}

/// E g(X) for X ~ N(mean, var) by Gauss–Hermite.
pub(crate) fn gauss_expect1<G: Fn(f64) -> f64>(mean: f64, var: f64, g: G) -> f64 {
    if var == 0.0 {
        return g(mean);
    }
    let rule = hermite64();
    let s = (2.0 * var).sqrt();
    rule.nodes.iter().zip(&rule.weights).map(|(z, w)| w * g(mean + s * z)).sum::<f64>() / core::f64::consts::PI.sqrt()
}

/// E g(X, W) for independent X ~ N(mean, var), W ~ N(0, 1).
pub(crate) fn gauss_expect2<G: Fn(f64, f64) -> f64>(mean: f64, var: f64, g: G) -> f64 {
    gauss_expect1(mean, var, |x| gauss_expect1(0.0, 1.0, |w| g(x, w)))
}

/// One standard normal draw, for callers holding a stream.
pub fn std_normal(rng: &mut crate::rng::StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// ∫ D(θ) ρ(dθ) over a Beta or scaled-Beta law.
///
/// Gauss–Legendre with 64 nodes per panel on the window mean ± 40 sd of the
/// unit-scale Beta; the panel count doubles until successive estimates agree
/// to 1e-8 relative. Nodes whose posterior log-weight is more than 50 below
/// the largest are skipped. Laws with a shape below one go through the
/// singularity-aware adaptive Beta quadrature instead.
pub fn risk_integral<D: FnMut(f64) -> Result<f64>>(posterior: &FamilyLaw, mut divergence: D) -> Result<f64> {
    let s = posterior.scaled();
    let (a, b) = (s.base.a, s.base.b);
    if a < 1.0 || b < 1.0 {
        let mut failure = None;
        let v = expect_beta(
            a,
            b,
            |t| match divergence(s.from_unit(t)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            Tolerance { abs: 1e-10, rel: 1e-9, max_depth: 30 },
        )?;
        return match failure {
            Some(e) => Err(e),
            None => Ok(v),
        };
    }
    let mean = s.base.mean();
    let sd = s.base.variance().sqrt();
    let lo = (mean - 40.0 * sd).max(0.0);
    let hi = (mean + 40.0 * sd).min(1.0);
    let log_norm = s.base.log_norm();
    let rule = gl64();
    let mut prev: Option<f64> = None;
    let mut panels = 1usize;
    for _ in 0..=10 {
        let width = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * rule.nodes.len());
        for k in 0..panels {
            let (pa, pb) = (lo + k as f64 * width, lo + (k + 1) as f64 * width);
            let (mid, half) = (0.5 * (pa + pb), 0.5 * (pb - pa));
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let t = mid + half * x;
                let lw = crate::quadrature::beta_log_pdf(a, b, log_norm, t) + (w * half).ln();
                nodes.push((t, lw));
            }
        }
        let top = nodes.iter().map(|n| n.1).fold(f64::NEG_INFINITY, f64::max);
        let mut est = 0.0;
        for (t, lw) in nodes {
            if lw < top - 50.0 {
                continue;
            }
            est += lw.exp() * divergence(s.from_unit(t))?;
        }
        if let Some(p) = prev {
            if (est - p).abs() <= 1e-8 * est.abs() || (est - p).abs() <= 1e-300 {
                return Ok(est);
            }
        }
        prev = Some(est);
        panels *= 2;
    }
    Err(Error::Quadrature("risk integral did not settle after 10 panel doublings".to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::BetaLaw;

    #[test]
    fn equal_parameters_give_zero() {
        for kind in [ModelKind::FiniteBd { k: 5 }, ModelKind::ReflectedBd, ModelKind::Ar1Gauss] {
            let th = if kind == ModelKind::Ar1Gauss { 0.2 } else { 0.3 };
            for mode in [InitMode::Shared, InitMode::InvariantPair] {
                let q = PathDivergenceQuery::new(kind, th, th, 7, 0.5, mode);
                assert_eq!(renyi_exact(&q).unwrap(), 0.0);
                assert_eq!(kl_path(&kind, th, th, 7, mode, &InitLaw::Invariant).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn ar1_one_step_shared_point() {
        let (th, th0, x0, a) = (0.7, -0.1, 1.5, 0.3);
        let q = PathDivergenceQuery::new(ModelKind::Ar1Gauss, th, th0, 1, a, InitMode::Shared).with_init(InitLaw::Point(x0));
        let d = renyi_exact_ar1(&q).unwrap();
        let want = a * x0 * x0 * (th - th0) * (th - th0) / 2.0;
        assert!((d - want).abs() < 1e-14, "{d} vs {want}");
    }

    #[test]
    fn risk_integral_normalization() {
        let law: FamilyLaw = BetaLaw::new(30.0, 50.0).unwrap().into();
        assert!((risk_integral(&law, |_| Ok(1.0)).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(risk_integral(&law, |_| Ok(0.0)).unwrap(), 0.0);
        let m = risk_integral(&law, Ok).unwrap();
        assert!((m - 30.0 / 80.0).abs() < 1e-12);
    }
}
