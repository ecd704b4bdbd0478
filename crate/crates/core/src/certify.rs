//! Bound right-hand sides and the per-replication coverage experiment.
//!
//! A run is split into [`prepare`] (ε_n, θ* and the source moments, shared by
//! all replications), [`replicate`] (one simulated path, one fit, one risk
//! integral) and [`assemble`]. Each replication draws only from its own
//! stream, so the std harness may run them in any order or in parallel.

use crate::beta::FamilyLaw;
use crate::conditions::{condition_row, default_theta_grid, kl_minimizer, ConditionRow, ConditionSetup, KlMinimum};
use crate::divergence::{renyi_exact, risk_integral, sample_variance, PathDivergenceQuery};
use crate::error::{Error, Result};
use crate::models::{loglik_ratio_between, simulate_with, InitLaw, InitMode, ModelKind};
use crate::prelude::*;
use crate::rng::{mix, stream};
use crate::variational::{fit_klvb, vb_objective, FitOptions, VbProblem};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("α = {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// [(α+1)nε_n + α√(nε_n/η) − ln ε] / (1 − α).
pub fn theorem22_rhs(alpha: f64, n: usize, epsilon_n: f64, epsilon: f64, eta: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_levels(epsilon, eta)?;
    if !(epsilon_n >= 0.0) {
        return Err(Error::param("ε_n must be non-negative"));
    }
    let ne = n as f64 * epsilon_n;
    Ok(((alpha + 1.0) * ne + alpha * (ne / eta).sqrt() - epsilon.ln()) / (1.0 - alpha))
}

fn check_levels(epsilon: f64, eta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0 && eta > 0.0 && eta < 1.0) {
        return Err(Error::param(format!("ε = {epsilon} and η = {eta} must lie in (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorollaryRhs {
    /// (α+1)ε_n/(1−α).
    pub as_printed: f64,
    /// The theorem bound at η = 1/(nε_n), ε = e^{−nε_n}, which simplifies to
    /// (2+2α)nε_n/(1−α).
    pub as_derived: f64,
}

pub fn corollary23_rhs(alpha: f64, n: usize, epsilon_n: f64) -> Result<CorollaryRhs> {
    check_alpha(alpha)?;
    let ne = n as f64 * epsilon_n;
    if !(ne > 2.0) {
        return Err(Error::param(format!("nε_n = {ne} must exceed 2")));
    }
    let as_printed = (alpha + 1.0) * epsilon_n / (1.0 - alpha);
    // η = 1/(nε_n) gives √(nε_n/η) = nε_n; ε = e^{−nε_n} gives −ln ε = nε_n
    let as_derived = ((alpha + 1.0) * ne + alpha * ne + ne) / (1.0 - alpha);
    Ok(CorollaryRhs { as_printed, as_derived })
}

/// The misspecified bound, with E and Var of r_n(θ*, θ0) under the source.
pub fn theorem51_rhs(
    alpha: f64,
    n: usize,
    epsilon_n: f64,
    epsilon: f64,
    eta: f64,
    mean_ratio: f64,
    var_ratio: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    check_levels(epsilon, eta)?;
    let ne = n as f64 * epsilon_n;
    let spread = ((2.0 * ne + 2.0 * var_ratio.max(0.0)) / eta).sqrt();
    Ok(((alpha + 1.0) * ne + mean_ratio + alpha * spread - epsilon.ln()) / (1.0 - alpha))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Proposition21 {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// ∫ D_α(P_θ, P_θ0) ρ(dθ) against [F(ρ) + ln(1/ε)]/(1−α), with F the VB
/// objective on the observed path. `init` is the shared initial law, unused
/// under the invariant pair.
pub fn proposition21_check(problem: &VbProblem, init: &InitLaw, rho: &FamilyLaw, epsilon: f64) -> Result<Proposition21> {
    check_alpha(problem.alpha)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("ε must lie in (0, 1)"));
    }
    let lhs = posterior_risk(problem, rho, init)?;
    let rhs = (vb_objective(problem, rho)? - epsilon.ln()) / (1.0 - problem.alpha);
    Ok(Proposition21 { lhs, rhs, satisfied: lhs <= rhs })
}

/// ∫ D_α(P_θ^{(n)}, P_src^{(n)}) ρ(dθ) with the exact evaluators.
fn posterior_risk(problem: &VbProblem, rho: &FamilyLaw, init: &InitLaw) -> Result<f64> {
    let query = PathDivergenceQuery {
        model: problem.model,
        source: problem.source,
        theta: problem.theta0,
        theta0: problem.theta0,
        n: problem.traj.n(),
        alpha: problem.alpha,
        init_mode: problem.mode,
        init: init.clone(),
    };
    risk_integral(rho, |theta| renyi_exact(&query.with_theta(theta)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "source", rename_all = "snake_case"))]
pub enum EpsilonSource {
    /// max of the three conditions over n, at this n, with `replications`
    /// paths for the variance condition.
    FromConditions {
        replications: usize,
    },
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    /// The fitted model. With `misspec` set the data come from the
    /// alternating chain instead and the model must be `reflected_bd`.
    pub model: ModelKind,
    pub theta0: f64,
    pub n: usize,
    pub alpha: f64,
    pub prior: FamilyLaw,
    pub init_mode: InitMode,
    pub init: InitLaw,
    pub replications: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub epsilon_n: EpsilonSource,
    pub seed: u64,
    /// δ_m of the misspecified source.
    pub misspec: Option<f64>,
    /// Source paths for E and Var of r_n(θ*, θ0) in misspecified runs.
    pub inner_replications: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return cfg(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if !(self.epsilon > 0.0 && self.eta > 0.0 && self.epsilon + self.eta < 1.0) {
            return cfg(format!("need ε, η > 0 and ε + η < 1; got {} and {}", self.epsilon, self.eta));
        }
        if self.replications < 50 {
            return cfg(format!("replications = {} is below 50", self.replications));
        }
        if self.n < 1 {
            return cfg("n must be at least 1".to_string());
        }
        match self.epsilon_n {
            EpsilonSource::Fixed { value } if !(value > 0.0) => return cfg("fixed ε_n must be positive".to_string()),
            EpsilonSource::FromConditions { replications } if replications < 2 => {
                return cfg("condition replications must be at least 2".to_string())
            }
            _ => {}
        }
        if let Some(d) = self.misspec {
            if self.model != ModelKind::ReflectedBd {
                return cfg("misspecified runs fit the reflected birth–death model".to_string());
            }
            if !(d >= 0.0) {
                return cfg("δ_m must be non-negative".to_string());
            }
            if self.inner_replications < 2 {
                return cfg("inner_replications must be at least 2".to_string());
            }
        }
        self.source().check_theta(self.theta0).map_err(|e| Error::Config(e.to_string()))?;
        let (lo, hi) = self.model.theta_range();
        let (plo, phi) = self.prior.support();
        if (plo - lo).abs() > 1e-12 || (phi - hi).abs() > 1e-12 {
            return cfg(format!("prior support ({plo}, {phi}) differs from the θ range ({lo}, {hi})"));
        }
        Ok(())
    }

    /// The data-generating kind.
    pub fn source(&self) -> ModelKind {
        match self.misspec {
            Some(delta_m) => ModelKind::MisspecBd { delta_m },
            None => self.model,
        }
    }

    fn source_init(&self) -> InitLaw {
        match self.init_mode {
            InitMode::InvariantPair => InitLaw::Invariant,
            InitMode::Shared => self.init.clone(),
        }
    }
}

/// Quantities of a misspecified run that do not depend on the replication.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MisspecTerms {
    pub projection: KlMinimum,
    /// E[r_n(θ*, θ0)] = KL(P_src ‖ P_θ*), by simulation.
    pub mean_ratio: f64,
    pub var_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub epsilon_n: f64,
    pub conditions: Option<ConditionRow>,
    pub misspec: Option<MisspecTerms>,
    /// Right-hand side of the theorem the coverage is checked against.
    pub rhs: f64,
}

const CONDITION_STREAM: u64 = u64::MAX;
const INNER_STREAM: u64 = u64::MAX - 1;

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let source = config.source();
    let misspec_projection = match config.misspec {
        Some(_) => Some(kl_minimizer(&config.model, &source, config.theta0, &default_theta_grid(&config.model))?),
        None => None,
    };
    let (epsilon_n, conditions) = match config.epsilon_n {
        EpsilonSource::Fixed { value } => (value, None),
        EpsilonSource::FromConditions { replications } => {
            let setup = match &misspec_projection {
                Some(p) => ConditionSetup::misspecified(config.model, p.theta_star, source, config.theta0, config.init_mode),
                None => ConditionSetup::well_specified(config.model, config.theta0, config.init_mode, config.init.clone()),
            };
            let row = condition_row(&setup, config.n, &config.prior, replications, mix(config.seed, CONDITION_STREAM))?;
            (row.epsilon_n(), Some(row))
        }
    };
    let misspec = match misspec_projection {
        Some(projection) => {
            let init = config.source_init();
            let inner_seed = mix(config.seed, INNER_STREAM);
            let ratios: Vec<f64> = (0..config.inner_replications)
                .map(|r| {
                    let mut rng = stream(inner_seed, r as u64);
                    let traj = simulate_with(&source, config.theta0, &init, config.n, &mut rng)?;
                    loglik_ratio_between(&config.model, projection.theta_star, &source, config.theta0, &traj, config.init_mode)
                })
                .collect::<Result<_>>()?;
            let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let var_ratio = sample_variance(&ratios).estimate;
            Some(MisspecTerms { projection, mean_ratio, var_ratio })
        }
        None => None,
    };
    let rhs = match &misspec {
        Some(m) => theorem51_rhs(config.alpha, config.n, epsilon_n, config.epsilon, config.eta, m.mean_ratio, m.var_ratio)?,
        None => theorem22_rhs(config.alpha, config.n, epsilon_n, config.epsilon, config.eta)?,
    };
    Ok(Prepared { config: config.clone(), epsilon_n, conditions, misspec, rhs })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Replication {
    pub rep: usize,
    /// ∫ D_α ρ̂(dθ) for the fitted law ρ̂; NaN when the replication failed.
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub prop21_rhs: f64,
    pub prop21_satisfied: bool,
    pub posterior: Option<FamilyLaw>,
    pub converged: bool,
    pub error: Option<String>,
}

/// One replication: simulate from stream `rep`, fit, integrate the risk.
pub fn replicate(prep: &Prepared, rep: usize) -> Replication {
    match try_replicate(prep, rep) {
        Ok(r) => r,
        Err(e) => Replication {
            rep,
            lhs: f64::NAN,
            rhs: prep.rhs,
            satisfied: false,
            prop21_rhs: f64::NAN,
            prop21_satisfied: false,
            posterior: None,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

fn try_replicate(prep: &Prepared, rep: usize) -> Result<Replication> {
    let c = &prep.config;
    let source = c.source();
    let mut rng = stream(c.seed, rep as u64);
    let traj = simulate_with(&source, c.theta0, &c.source_init(), c.n, &mut rng)?;
    let problem = VbProblem::new(c.model, traj, c.alpha, c.prior, c.theta0).with_mode(c.init_mode).with_source(source);
    let fit = fit_klvb(&problem, FitOptions::default())?;
    let lhs = posterior_risk(&problem, &fit.law, &c.init)?;
    if !(lhs.is_finite() && lhs >= 0.0) {
        return Err(Error::numerical(format!("risk integral {lhs} is not a finite non-negative number")));
    }
    let prop21_rhs = (fit.objective - c.epsilon.ln()) / (1.0 - c.alpha);
    Ok(Replication {
        rep,
        lhs,
        rhs: prep.rhs,
        satisfied: lhs <= prep.rhs,
        prop21_rhs,
        prop21_satisfied: lhs <= prop21_rhs,
        posterior: Some(fit.law),
        converged: fit.converged,
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub config: ExperimentConfig,
    pub epsilon_n: f64,
    pub conditions: Option<ConditionRow>,
    pub misspec: Option<MisspecTerms>,
    pub rhs: f64,
    pub corollary: Option<CorollaryRhs>,
    pub replications: Vec<Replication>,
    pub completed: usize,
    /// Share of completed replications with lhs ≤ rhs.
    pub coverage: f64,
    /// 1 − ε − η.
    pub guaranteed_level: f64,
    pub prop21_coverage: f64,
    /// 1 − ε.
    pub prop21_level: f64,
    /// Some replication failed.
    pub partial: bool,
}

/// Collects replications (in any order) into a report sorted by index.
pub fn assemble(prep: &Prepared, mut reps: Vec<Replication>) -> BoundReport {
    reps.sort_by_key(|r| r.rep);
    let done: Vec<&Replication> = reps.iter().filter(|r| r.error.is_none()).collect();
    let completed = done.len();
    let share = |f: fn(&Replication) -> bool| {
        if completed == 0 {
            f64::NAN
        } else {
            done.iter().filter(|r| f(r)).count() as f64 / completed as f64
        }
    };
    let c = &prep.config;
    BoundReport {
        config: c.clone(),
        epsilon_n: prep.epsilon_n,
        conditions: prep.conditions,
        misspec: prep.misspec,
        rhs: prep.rhs,
        corollary: corollary23_rhs(c.alpha, c.n, prep.epsilon_n).ok(),
        coverage: share(|r| r.satisfied),
        prop21_coverage: share(|r| r.prop21_satisfied),
        guaranteed_level: 1.0 - c.epsilon - c.eta,
        prop21_level: 1.0 - c.epsilon,
        partial: completed < reps.len(),
        completed,
        replications: reps,
    }
}

/// Sequential run of every replication.
pub fn run_certification(config: &ExperimentConfig) -> Result<BoundReport> {
    let prep = prepare(config)?;
    let reps = (0..config.replications).map(|r| replicate(&prep, r)).collect();
    Ok(assemble(&prep, reps))
}

/// Same as [`run_certification`]; the config must carry `misspec`.
pub fn run_misspecified(config: &ExperimentConfig) -> Result<BoundReport> {
    if config.misspec.is_none() {
        return Err(Error::Config("misspecified run without δ_m".to_string()));
    }
    run_certification(config)
}
