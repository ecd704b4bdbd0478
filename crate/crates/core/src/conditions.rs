//! The witness laws ρ_n and numerical checks of the three sufficient
//! conditions, the one-step smoothness certificate, rate fitting and the
//! KL projection of a misspecified source onto the model.

use rand::Rng;

use crate::beta::{family_kl, BetaLaw, FamilyLaw, ScaledBetaLaw};
use crate::divergence::{gauss_expect2, kl_path_between, kl_rate, risk_integral, sample_variance, var_rn_bound};
use crate::error::{Error, Result};
use crate::mixing::model_profile;
use crate::models::{invariant, loglik_ratio_between, simulate_with, InitLaw, InitMode, ModelKind, Trajectory};
use crate::optimize::golden_section;
use crate::prelude::*;
use crate::rng::{stream, StreamRng};

/// The Beta witness centred at θ0 with variance Θ(1/n).
pub fn rho_n_recipe(kind: &ModelKind, theta0: f64, n: usize) -> Result<FamilyLaw> {
    kind.check_theta(theta0)?;
    let nf = n as f64;
    let (a, b, m, c) = match kind {
        ModelKind::FiniteBd { .. } => (nf * theta0, nf * (1.0 - theta0), 1.0, 0.0),
        ModelKind::ReflectedBd | ModelKind::MisspecBd { .. } => (nf * 2.0 * theta0, nf * (1.0 - 2.0 * theta0), 0.5, 0.0),
        ModelKind::Ar1Gauss => (nf * (1.0 + theta0) / 2.0, nf * (1.0 - theta0) / 2.0, 2.0, -1.0),
    };
    let base = BetaLaw::new(a, b)?;
    Ok(if m == 1.0 { FamilyLaw::Beta(base) } else { FamilyLaw::Scaled(ScaledBetaLaw::new(base, m, c)?) })
}

/// Which law generates the data, which model is fitted, and where ρ_n sits.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionSetup {
    pub model: ModelKind,
    /// Centre of ρ_n: θ0 when well specified, θ* otherwise.
    pub center: f64,
    pub source: ModelKind,
    pub source_theta: f64,
    pub mode: InitMode,
    /// Initial law of the source under the shared mode.
    pub init: InitLaw,
    pub delta: f64,
}

impl ConditionSetup {
    pub fn well_specified(model: ModelKind, theta0: f64, mode: InitMode, init: InitLaw) -> Self {
        ConditionSetup { model, center: theta0, source: model, source_theta: theta0, mode, init, delta: 1.0 }
    }

    pub fn misspecified(model: ModelKind, theta_star: f64, source: ModelKind, theta0: f64, mode: InitMode) -> Self {
        ConditionSetup { model, center: theta_star, source, source_theta: theta0, mode, init: InitLaw::Invariant, delta: 1.0 }
    }

    fn is_well_specified(&self) -> bool {
        self.model == self.source && self.center == self.source_theta
    }

    fn source_init(&self) -> InitLaw {
        match self.mode {
            InitMode::InvariantPair => InitLaw::Invariant,
            InitMode::Shared => self.init.clone(),
        }
    }

    fn kl(&self, theta: f64, n: usize) -> Result<f64> {
        kl_path_between(&self.model, theta, &self.source, self.source_theta, n, self.mode, &self.init)
    }
}

/// ∫ E[r_n(θ, θ_c)] ρ_n(dθ), the expectation taken under the source.
pub fn condition_i(setup: &ConditionSetup, n: usize) -> Result<f64> {
    let rho = rho_n_recipe(&setup.model, setup.center, n)?;
    let base = if setup.is_well_specified() { 0.0 } else { setup.kl(setup.center, n)? };
    risk_integral(&rho, |theta| Ok(setup.kl(theta, n)? - base))
}

/// `reps` source paths of length n; every θ reuses the same paths.
pub fn source_bank(setup: &ConditionSetup, n: usize, reps: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let init = setup.source_init();
    (0..reps)
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            simulate_with(&setup.source, setup.source_theta, &init, n, &mut rng)
        })
        .collect()
}

/// ∫ Var[r_n(θ, θ_c)] ρ_n(dθ) with the variance estimated on a common bank
/// of `reps` source paths.
pub fn condition_ii(setup: &ConditionSetup, n: usize, reps: usize, seed: u64) -> Result<f64> {
    if reps < 2 {
        return Err(Error::param("condition (ii) needs at least two replications"));
    }
    let bank = source_bank(setup, n, reps, seed)?;
    let rho = rho_n_recipe(&setup.model, setup.center, n)?;
    let mut ratios = vec![0.0; reps];
    risk_integral(&rho, |theta| {
        if theta == setup.center {
            return Ok(0.0);
        }
        for (slot, traj) in ratios.iter_mut().zip(&bank) {
            *slot = loglik_ratio_between(&setup.model, theta, &setup.model, setup.center, traj, setup.mode)?;
        }
        Ok(sample_variance(&ratios).estimate)
    })
}

/// ∫ of the mixing variance bound against ρ_n (well-specified setups only).
pub fn condition_ii_bound(setup: &ConditionSetup, n: usize) -> Result<f64> {
    if !setup.is_well_specified() {
        return Err(Error::param("the mixing bound needs a well-specified setup"));
    }
    let profile = model_profile(&setup.source, setup.source_theta)?;
    let rho = rho_n_recipe(&setup.model, setup.center, n)?;
    risk_integral(&rho, |theta| {
        var_rn_bound(&setup.model, theta, setup.source_theta, n, setup.delta, &profile, setup.mode, &setup.init)
    })
}

/// KL(ρ_n ‖ π).
pub fn condition_iii(kind: &ModelKind, theta0: f64, n: usize, prior: &FamilyLaw) -> Result<f64> {
    family_kl(&rho_n_recipe(kind, theta0, n)?, prior)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionRow {
    pub n: usize,
    pub cond_i: f64,
    pub cond_ii: f64,
    pub cond_iii: f64,
}

impl ConditionRow {
    /// ε_n = max of the three conditions divided by n.
    pub fn epsilon_n(&self) -> f64 {
        let nf = self.n as f64;
        (self.cond_i / nf).max(self.cond_ii / nf).max(self.cond_iii / nf).max(0.0)
    }
}

/// All three conditions at one horizon.
pub fn condition_row(setup: &ConditionSetup, n: usize, prior: &FamilyLaw, reps: usize, seed: u64) -> Result<ConditionRow> {
    Ok(ConditionRow {
        n,
        cond_i: condition_i(setup, n)?,
        cond_ii: condition_ii(setup, n, reps, seed)?,
        cond_iii: condition_iii(&setup.model, setup.center, n, prior)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares y = intercept + slope·x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::param("linear fit needs two or more paired points"));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::param("linear fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(RateFit { slope, intercept: my - slope * mx, r_squared })
}

/// Least squares on (ln n, ln value).
pub fn rate_fit(ns: &[f64], values: &[f64]) -> Result<RateFit> {
    if ns.len() < 4 {
        return Err(Error::param("rate fit needs at least four points"));
    }
    if let Some(v) = ns.iter().chain(values).find(|v| !(**v > 0.0)) {
        return Err(Error::Domain { what: "rate_fit", value: *v });
    }
    let lx: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
    /// Log-log fits of condition/n against n.
    pub slope_i: Option<RateFit>,
    pub slope_ii: Option<RateFit>,
    pub slope_iii: Option<RateFit>,
    /// Fit of the raw condition (iii) against ln n.
    pub growth_iii: Option<RateFit>,
    /// ε_n ≈ c·n^exponent fitted to the per-row ε_n.
    pub epsilon_c: f64,
    pub epsilon_exponent: f64,
}

/// Fits the rates of a sweep. Fits needing positive values are skipped when
/// some value is zero.
pub fn summarize(rows: Vec<ConditionRow>) -> Result<ConditionReport> {
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let per_n = |f: fn(&ConditionRow) -> f64| -> Vec<f64> { rows.iter().map(|r| f(r) / r.n as f64).collect() };
    let fit = |v: Vec<f64>| rate_fit(&ns, &v).ok();
    let slope_i = fit(per_n(|r| r.cond_i));
    let slope_ii = fit(per_n(|r| r.cond_ii));
    let slope_iii = fit(per_n(|r| r.cond_iii));
    let log_ns: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let raw_iii: Vec<f64> = rows.iter().map(|r| r.cond_iii).collect();
    let growth_iii = linear_fit(&log_ns, &raw_iii).ok();
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon_n()).collect();
    let (epsilon_c, epsilon_exponent) = match rate_fit(&ns, &eps) {
        Ok(f) => (f.intercept.exp(), f.slope),
        Err(_) => (f64::NAN, f64::NAN),
    };
    Ok(ConditionReport { rows, slope_i, slope_ii, slope_iii, growth_iii, epsilon_c, epsilon_exponent })
}

/// One moment series of the smoothness certificate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FMoment {
    pub ns: Vec<usize>,
    /// ∫|f_k(θ, θ0)|^{2+δ} ρ_n(dθ) for each n.
    pub values: Vec<f64>,
    /// max over n of n·value.
    pub c: f64,
    pub fit: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothnessCertificate {
    pub delta: f64,
    pub samples: usize,
    pub violations: usize,
    /// max over samples of |log ratio| − Σ M_k|f_k| (≤ 0 when dominated).
    pub worst_slack: f64,
    /// (θ, x, y) at the worst slack.
    pub witness: (f64, f64, f64),
    /// E[M_k^{2+δ}] under the stationary source, per k.
    pub moment_bounds: Vec<f64>,
    pub f_moments: Vec<FMoment>,
}

impl SmoothnessCertificate {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// (M_k(x, y), f_k(θ, θ0)) for the model's decomposition.
fn decomposition(kind: &ModelKind, theta: f64, theta0: f64, x: f64, y: f64) -> [(f64, f64); 2] {
    match kind {
        // (θ0 − θ)·x y + ½(θ² − θ0²)·x²
        ModelKind::Ar1Gauss => [((x * y).abs(), theta0 - theta), (x * x, 0.5 * (theta * theta - theta0 * theta0))],
        _ => {
            let up = if y > x { 1.0 } else { 0.0 };
            [(up, (theta0 / theta).ln()), (1.0 - up, ((1.0 - theta0) / (1.0 - theta)).ln())]
        }
    }
}

fn f_values(kind: &ModelKind, theta: f64, theta0: f64) -> [f64; 2] {
    let d = decomposition(kind, theta, theta0, 0.0, 0.0);
    [d[0].1, d[1].1]
}

/// Default horizons 2⁴, …, 2¹².
pub fn default_n_grid() -> Vec<usize> {
    (4..=12).map(|e| 1usize << e).collect()
}

/// Checks the one-step decomposition |log p_θ0 − log p_θ| ≤ Σ_k M_k|f_k| on
/// sampled stationary transitions with θ uniform on the model range, the
/// ρ_n-moments of the f_k, and the stationary moments of the M_k.
pub fn assumption31_check(
    kind: &ModelKind,
    theta0: f64,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SmoothnessCertificate> {
    if matches!(kind, ModelKind::MisspecBd { .. }) {
        return Err(Error::param("the smoothness decomposition covers the three well-specified models"));
    }
    if !(delta > 0.0) || n_samples == 0 {
        return Err(Error::param("smoothness check needs δ > 0 and at least one sample"));
    }
    kind.check_theta(theta0)?;
    let p = 2.0 + delta;
    let mut rng: StreamRng = stream(seed, 0);
    let traj = simulate_with(kind, theta0, &InitLaw::Invariant, n_samples, &mut rng)?;
    let (lo, hi) = kind.theta_range();
    let (lo, hi) = (lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo));
    let mut violations = 0;
    let mut worst_slack = f64::NEG_INFINITY;
    let mut witness = (theta0, 0.0, 0.0);
    for w in traj.states.windows(2) {
        let (x, y) = (w[0], w[1]);
        let theta = rng.random_range(lo..hi);
        let lhs =
            (crate::models::step_logdensity(kind, theta0, x, y)? - crate::models::step_logdensity(kind, theta, x, y)?).abs();
        let rhs: f64 = decomposition(kind, theta, theta0, x, y).iter().map(|(m, f)| m * f.abs()).sum();
        let slack = lhs - rhs;
        if slack > 1e-10 * rhs.max(1.0) {
            violations += 1;
        }
        if slack > worst_slack {
            worst_slack = slack;
            witness = (theta, x, y);
        }
    }
    let moment_bounds = match invariant(kind, theta0)? {
        crate::models::Distribution::Gaussian { var, .. } => {
            vec![
                gauss_expect2(0.0, var, |x, w| (x * (theta0 * x + w)).abs().powf(p)),
                gauss_expect2(0.0, var, |x, _| (x * x).powf(p)),
            ]
        }
        crate::models::Distribution::Discrete { masses } => {
            let chain = kind.chain(theta0)?;
            let up: f64 = masses.iter().enumerate().map(|(i, m)| m * chain.birth(i)).sum();
            vec![up, 1.0 - up]
        }
    };
    let ns = default_n_grid();
    let mut f_moments = Vec::with_capacity(2);
    for k in 0..2 {
        let values: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let rho = rho_n_recipe(kind, theta0, n)?;
                risk_integral(&rho, |theta| Ok(f_values(kind, theta, theta0)[k].abs().powf(p)))
            })
            .collect::<Result<_>>()?;
        let c = ns.iter().zip(&values).map(|(n, v)| *n as f64 * v).fold(0.0, f64::max);
        let nsf: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
        let fit = rate_fit(&nsf, &values).ok();
        f_moments.push(FMoment { ns: ns.clone(), values, c, fit });
    }
    Ok(SmoothnessCertificate { delta, samples: n_samples, violations, worst_slack, witness, moment_bounds, f_moments })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LipschitzCheck {
    /// sup over the grid of |∂f/∂θ| = 1/θ.
    pub constant: f64,
    pub holds: bool,
    /// max over the grid of |f(θ)| − L|θ − θ0|.
    pub worst: f64,
}

/// Mean-value bound |ln(θ0/θ)| ≤ L|θ − θ0| on an even grid over [lo, hi].
pub fn lipschitz_check(theta0: f64, lo: f64, hi: f64, points: usize) -> Result<LipschitzCheck> {
    if !(lo > 0.0 && lo < hi && hi < 1.0 && theta0 >= lo && theta0 <= hi && points >= 2) {
        return Err(Error::param("Lipschitz check needs 0 < lo ≤ θ0 ≤ hi < 1 and two grid points"));
    }
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let constant = grid.iter().map(|t| 1.0 / t).fold(0.0, f64::max);
    let worst = grid.iter().map(|t| (theta0 / t).ln().abs() - constant * (t - theta0).abs()).fold(f64::NEG_INFINITY, f64::max);
    Ok(LipschitzCheck { constant, holds: worst <= 1e-15, worst })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KlMinimum {
    pub theta_star: f64,
    pub kl_rate: f64,
    /// The grid minimum sat on the first or last grid point.
    pub on_boundary: bool,
}

/// θ* minimizing the stationary per-step KL from the source to the model,
/// by grid search refined with golden-section search to 1e-6.
pub fn kl_minimizer(model: &ModelKind, source: &ModelKind, theta0: f64, grid: &[f64]) -> Result<KlMinimum> {
    if grid.len() < 3 {
        return Err(Error::param("KL minimizer needs at least three grid points"));
    }
    let rate = |theta: f64| kl_rate(model, theta, source, theta0);
    let values: Vec<f64> = grid.iter().map(|&t| rate(t)).collect::<Result<_>>()?;
    let (imin, _) =
        values.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    let on_boundary = imin == 0 || imin == grid.len() - 1;
    let lo = grid[imin.saturating_sub(1)];
    let hi = grid[(imin + 1).min(grid.len() - 1)];
    let (theta_star, kl) = golden_section(|t| rate(t).unwrap_or(f64::INFINITY), lo, hi, 1e-7);
    let (theta_star, kl) = if kl <= values[imin] { (theta_star, kl) } else { (grid[imin], values[imin]) };
    Ok(KlMinimum { theta_star, kl_rate: kl.max(0.0), on_boundary })
}

/// 99 points evenly inside the model's θ range.
pub fn default_theta_grid(kind: &ModelKind) -> Vec<f64> {
    let (lo, hi) = kind.theta_range();
    (1..100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect()
}
