//! The `pacvb` command. Each subcommand resolves its parameters as
//! built-in defaults, then the `--config` JSON, then explicit flags, and
//! writes the resolved parameters next to its results.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use pacvb_core::certify::{BoundReport, EpsilonSource, ExperimentConfig};
use pacvb_core::conditions::{default_n_grid, default_theta_grid, kl_minimizer, ConditionSetup};
use pacvb_core::divergence::{renyi_exact, renyi_mc, Estimate, PathDivergenceQuery};
use pacvb_core::mixing::{
    alpha_event_lb, default_drift_grid, drift_check_ar1, mixing_sum, model_profile, AlphaEvent, DriftReport, MixingProfile,
};
use pacvb_core::models::simulate;
use pacvb_core::variational::{fit_klvb, FitOptions, VbProblem};
use pacvb_core::{BetaLaw, FamilyLaw, InitLaw, InitMode, ModelKind, ScaledBetaLaw};

use crate::io::{self, ConditionOutput, Format, PosteriorRecord, TrajectoryMeta};
use crate::{harness, CliError};

#[derive(Debug, Parser)]
#[command(name = "pacvb", version, about = "Tempered-posterior VB and PAC-Bayes bound certification for Markov chains")]
pub struct Cli {
    /// JSON file with parameters for the subcommand; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "pacvb-out")]
    pub out: PathBuf,
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Progress and timings on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory and write it as CSV with a JSON sidecar.
    Simulate(SimulateArgs),
    /// Exact α-Rényi divergence between two path laws.
    Divergence(DivergenceArgs),
    /// Fit the KL-VB approximation to a trajectory.
    Fit(FitArgs),
    /// Sufficient-condition values over a grid of horizons.
    Conditions(ConditionsArgs),
    /// Monte Carlo coverage of the well-specified bound.
    Certify(CertifyArgs),
    /// Monte Carlo coverage of the misspecified bound.
    Misspec(CertifyArgs),
    /// Mixing profile, α-coefficients and the AR(1) drift check.
    Mixing(MixingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModelName {
    FiniteBd,
    ReflectedBd,
    Ar1Gauss,
    MisspecBd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModeName {
    Shared,
    InvariantPair,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    /// Top state of the finite chain.
    #[arg(long)]
    pub k: Option<usize>,
    /// Alternation amplitude of the misspecified chain.
    #[arg(long)]
    pub delta_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Start from this state instead of the invariant law.
    #[arg(long)]
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DivergenceArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub theta0: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
    #[arg(long)]
    pub x0: Option<f64>,
    /// Also run the Monte Carlo estimator with this many paths.
    #[arg(long)]
    pub mc_reps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// Trajectory CSV written by `simulate`; without it a path is simulated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Generating parameter for a simulated path.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Reference parameter of the log-likelihood ratio (default: the generating one).
    #[arg(long)]
    pub theta0: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
    /// Prior shapes on the unit scale (default 1, 1).
    #[arg(long)]
    pub prior_a: Option<f64>,
    #[arg(long)]
    pub prior_b: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConditionsArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub theta0: Option<f64>,
    /// `lo:hi` for the powers of two in between, or a comma list.
    #[arg(long)]
    pub n_grid: Option<String>,
    /// Paths per horizon for the variance condition.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
    #[arg(long)]
    pub prior_a: Option<f64>,
    #[arg(long)]
    pub prior_b: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub theta0: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MixingArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Moment exponent δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Largest lag for the α-coefficients of the finite chain.
    #[arg(long)]
    pub max_lag: Option<usize>,
}

fn mode_value(m: ModeName) -> Value {
    match m {
        ModeName::Shared => json!("shared"),
        ModeName::InvariantPair => json!("invariant_pair"),
    }
}

/// A patch for the `model` entry. A named model replaces the entry; a bare
/// `--k` or `--delta-m` edits it.
fn model_patch(f: &ModelFlags) -> Option<Value> {
    match f.model {
        Some(ModelName::FiniteBd) => Some(json!({"kind": "finite_bd", "k": f.k.unwrap_or(10)})),
        Some(ModelName::ReflectedBd) => Some(json!({"kind": "reflected_bd"})),
        Some(ModelName::Ar1Gauss) => Some(json!({"kind": "ar1_gauss"})),
        Some(ModelName::MisspecBd) => Some(json!({"kind": "misspec_bd", "delta_m": f.delta_m.unwrap_or(0.1)})),
        None => {
            let mut m = Map::new();
            if let Some(k) = f.k {
                m.insert("k".into(), json!(k));
            }
            if let Some(d) = f.delta_m {
                m.insert("delta_m".into(), json!(d));
            }
            (!m.is_empty()).then_some(Value::Object(m))
        }
    }
}

/// Recursive object merge; non-objects in `patch` replace.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if v.is_object() && slot.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

struct Patch(Map<String, Value>);

impl Patch {
    fn new() -> Self {
        Patch(Map::new())
    }

    fn set<T: Serialize>(&mut self, key: &str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.into(), serde_json::to_value(v).expect("plain value"));
        }
        self
    }

    fn model(&mut self, f: &ModelFlags) -> &mut Self {
        if let Some(v) = model_patch(f) {
            self.0.insert("model".into(), v);
            if f.model.is_none() {
                self.0.insert("__model_edit".into(), Value::Bool(true));
            }
        }
        self
    }

    fn mode(&mut self, m: Option<ModeName>) -> &mut Self {
        self.set("init_mode", m.map(mode_value))
    }

    fn x0(&mut self, x0: Option<f64>) -> &mut Self {
        self.set("init", x0.map(|x| json!({"init": "point", "value": x})))
    }
}

/// defaults ← config file ← flags. A named model replaces the whole entry.
fn resolve<T: DeserializeOwned>(defaults: Value, config: Option<&Path>, mut patch: Patch) -> Result<(T, Value), CliError> {
    let mut v = defaults;
    if let Some(path) = config {
        let file: Value = io::read_json(path)?;
        if !file.is_object() {
            return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
        }
        merge(&mut v, file);
    }
    let edit = patch.0.remove("__model_edit").is_some();
    if !edit {
        if let Some(m) = patch.0.remove("model") {
            v["model"] = m;
        }
    }
    merge(&mut v, Value::Object(patch.0));
    let t = serde_json::from_value(v.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((t, v))
}

/// Uniform law on the parameter range of `kind`, with unit-scale shapes `a`, `b`.
pub fn default_prior(kind: &ModelKind, a: f64, b: f64) -> pacvb_core::Result<FamilyLaw> {
    let base = BetaLaw::new(a, b)?;
    let (lo, hi) = kind.theta_range();
    if lo == 0.0 && hi == 1.0 {
        Ok(FamilyLaw::Beta(base))
    } else {
        Ok(FamilyLaw::Scaled(ScaledBetaLaw::new(base, hi - lo, lo)?))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SimulateParams {
    model: ModelKind,
    theta: f64,
    n: usize,
    init: InitLaw,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DivergenceParams {
    model: ModelKind,
    theta: f64,
    theta0: f64,
    n: usize,
    alpha: f64,
    init_mode: InitMode,
    init: InitLaw,
    mc_reps: Option<usize>,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FitParams {
    data: Option<PathBuf>,
    model: ModelKind,
    theta: f64,
    theta0: Option<f64>,
    n: usize,
    alpha: f64,
    init_mode: InitMode,
    init: InitLaw,
    prior_a: f64,
    prior_b: f64,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConditionParams {
    model: ModelKind,
    theta0: f64,
    n_grid: String,
    reps: usize,
    init_mode: InitMode,
    init: InitLaw,
    prior_a: f64,
    prior_b: f64,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MixingParams {
    model: ModelKind,
    theta: f64,
    delta: f64,
    max_lag: usize,
}

/// Parses `lo:hi` (powers of two from lo to hi) or `a,b,c`.
pub fn parse_n_grid(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Config(format!("n grid '{s}' is neither lo:hi nor a comma list"));
    let ns: Vec<usize> = if let Some((lo, hi)) = s.split_once(':') {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo == 0 || lo > hi {
            return Err(bad());
        }
        let mut v = Vec::new();
        let mut n = lo;
        while n <= hi {
            v.push(n);
            n = n.checked_mul(2).ok_or_else(bad)?;
        }
        v
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if ns.is_empty() || ns.contains(&0) {
        return Err(bad());
    }
    Ok(ns)
}

fn default_grid_string() -> String {
    let g = default_n_grid();
    format!("{}:{}", g[0], g[g.len() - 1])
}

/// Built-in well-specified experiment: finite chain K = 10.
pub fn certify_defaults() -> Value {
    json!({
        "model": {"kind": "finite_bd", "k": 10},
        "theta0": 0.35,
        "n": 500,
        "alpha": 0.5,
        "prior": {"family": "beta", "a": 1.0, "b": 1.0},
        "init_mode": "invariant_pair",
        "init": {"init": "invariant"},
        "replications": 200,
        "epsilon": 0.05,
        "eta": 0.05,
        "epsilon_n": {"source": "from_conditions", "replications": 1000},
        "seed": 42,
        "misspec": null,
        "inner_replications": 1000
    })
}

/// Built-in misspecified experiment: alternating chain fitted by the reflected one.
pub fn misspec_defaults() -> Value {
    json!({
        "model": {"kind": "reflected_bd"},
        "theta0": 0.3,
        "n": 300,
        "alpha": 0.5,
        "prior": {"family": "scaled", "base": {"a": 1.0, "b": 1.0}, "m": 0.5, "c": 0.0},
        "init_mode": "invariant_pair",
        "init": {"init": "invariant"},
        "replications": 100,
        "epsilon": 0.05,
        "eta": 0.05,
        "epsilon_n": {"source": "from_conditions", "replications": 1000},
        "seed": 42,
        "misspec": 0.1,
        "inner_replications": 1000
    })
}

/// What a successful command reports.
pub struct Outcome {
    pub summary: String,
}

fn vlog(cli: &Cli, msg: impl FnOnce() -> String) {
    if cli.verbose > 0 {
        eprintln!("{}", msg());
    }
}

/// Runs a parsed command; the caller prints the summary.
pub fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let start = Instant::now();
    io::ensure_dir(&cli.out)?;
    let cfg = cli.config.as_deref();
    let out = match &cli.command {
        Command::Simulate(a) => run_simulate(cli, cfg, a),
        Command::Divergence(a) => run_divergence(cli, cfg, a),
        Command::Fit(a) => run_fit(cli, cfg, a),
        Command::Conditions(a) => run_conditions(cli, cfg, a),
        Command::Certify(a) => run_certify(cli, cfg, a, false),
        Command::Misspec(a) => run_certify(cli, cfg, a, true),
        Command::Mixing(a) => run_mixing(cli, cfg, a),
    };
    vlog(cli, || format!("elapsed {:.3} s", start.elapsed().as_secs_f64()));
    out
}

fn run_simulate(cli: &Cli, cfg: Option<&Path>, a: &SimulateArgs) -> Result<Outcome, CliError> {
    let defaults = json!({
        "model": {"kind": "finite_bd", "k": 10}, "theta": 0.35, "n": 500,
        "init": {"init": "invariant"}, "seed": 42
    });
    let mut p = Patch::new();
    p.model(&a.model).set("theta", a.theta).set("n", a.n).x0(a.x0).set("seed", cli.seed);
    let (s, _): (SimulateParams, _) = resolve(defaults, cfg, p)?;
    let traj = simulate(&s.model, s.theta, &s.init, s.n, s.seed)?;
    let meta = TrajectoryMeta { model: s.model, theta: s.theta, init: s.init, n: s.n, seed: s.seed };
    let path = cli.out.join("trajectory.csv");
    io::write_trajectory(&path, &traj, &meta)?;
    Ok(Outcome { summary: format!("simulated {} steps of {} at θ = {} -> {}", s.n, s.model.name(), s.theta, path.display()) })
}

#[derive(Serialize)]
struct DivergenceOutput {
    params: Value,
    query: PathDivergenceQuery,
    exact: f64,
    monte_carlo: Option<Estimate>,
}

fn run_divergence(cli: &Cli, cfg: Option<&Path>, a: &DivergenceArgs) -> Result<Outcome, CliError> {
    let defaults = json!({
        "model": {"kind": "finite_bd", "k": 10}, "theta": 0.6, "theta0": 0.4, "n": 4, "alpha": 0.5,
        "init_mode": "shared", "init": {"init": "invariant"}, "mc_reps": null, "seed": 42
    });
    let mut p = Patch::new();
    p.model(&a.model)
        .set("theta", a.theta)
        .set("theta0", a.theta0)
        .set("n", a.n)
        .set("alpha", a.alpha)
        .mode(a.mode)
        .x0(a.x0)
        .set("mc_reps", a.mc_reps)
        .set("seed", cli.seed);
    let (d, params): (DivergenceParams, _) = resolve(defaults, cfg, p)?;
    let query = PathDivergenceQuery::new(d.model, d.theta, d.theta0, d.n, d.alpha, d.init_mode).with_init(d.init.clone());
    let exact = renyi_exact(&query)?;
    let monte_carlo = match d.mc_reps {
        Some(r) => Some(renyi_mc(&query, r, d.seed)?),
        None => None,
    };
    let mut summary = format!("D_{} = {}", d.alpha, io::num(exact));
    if let Some(mc) = &monte_carlo {
        summary.push_str(&format!(" (Monte Carlo {} ± {})", io::num(mc.estimate), io::num(mc.standard_error)));
    }
    if cli.format.json() {
        io::write_json(&cli.out.join("divergence.json"), &DivergenceOutput { params, query, exact, monte_carlo })?;
    }
    Ok(Outcome { summary })
}

#[derive(Serialize)]
struct FitOutput {
    params: Value,
    posterior: PosteriorRecord,
    grad_norm: f64,
    restarts: usize,
}

fn run_fit(cli: &Cli, cfg: Option<&Path>, a: &FitArgs) -> Result<Outcome, CliError> {
    let defaults = json!({
        "data": null, "model": {"kind": "finite_bd", "k": 10}, "theta": 0.35, "theta0": null, "n": 500,
        "alpha": 0.5, "init_mode": "shared", "init": {"init": "invariant"}, "prior_a": 1.0, "prior_b": 1.0, "seed": 42
    });
    let mut p = Patch::new();
    p.set("data", a.data.clone())
        .model(&a.model)
        .set("theta", a.theta)
        .set("theta0", a.theta0)
        .set("n", a.n)
        .set("alpha", a.alpha)
        .mode(a.mode)
        .set("prior_a", a.prior_a)
        .set("prior_b", a.prior_b)
        .set("seed", cli.seed);
    let (f, params): (FitParams, _) = resolve(defaults, cfg, p)?;
    let (model, traj, theta) = match &f.data {
        Some(path) => {
            let (traj, meta) = io::read_trajectory(path)?;
            (meta.model, traj, meta.theta)
        }
        None => (f.model, simulate(&f.model, f.theta, &f.init, f.n, f.seed)?, f.theta),
    };
    let prior = default_prior(&model, f.prior_a, f.prior_b)?;
    let problem = VbProblem::new(model, traj, f.alpha, prior, f.theta0.unwrap_or(theta)).with_mode(f.init_mode);
    let fit = fit_klvb(&problem, FitOptions::default())?;
    let posterior = PosteriorRecord::from(&fit);
    let summary = format!(
        "fitted {} on the unit scale: a = {}, b = {}, mean θ = {}, objective = {}{}",
        posterior.family,
        io::num(posterior.a),
        io::num(posterior.b),
        io::num(fit.law.mean()),
        io::num(fit.objective),
        if fit.converged { "" } else { " (not converged)" }
    );
    if cli.format.json() {
        io::write_json(
            &cli.out.join("posterior.json"),
            &FitOutput { params, posterior, grad_norm: fit.grad_norm, restarts: fit.restarts },
        )?;
    }
    Ok(Outcome { summary })
}

fn run_conditions(cli: &Cli, cfg: Option<&Path>, a: &ConditionsArgs) -> Result<Outcome, CliError> {
    let defaults = json!({
        "model": {"kind": "finite_bd", "k": 10}, "theta0": 0.3, "n_grid": default_grid_string(), "reps": 1000,
        "init_mode": "invariant_pair", "init": {"init": "invariant"}, "prior_a": 1.0, "prior_b": 1.0, "seed": 42
    });
    let mut p = Patch::new();
    p.model(&a.model)
        .set("theta0", a.theta0)
        .set("n_grid", a.n_grid.clone())
        .set("reps", a.reps)
        .mode(a.mode)
        .set("prior_a", a.prior_a)
        .set("prior_b", a.prior_b)
        .set("seed", cli.seed);
    let (c, _): (ConditionParams, _) = resolve(defaults, cfg, p)?;
    let ns = parse_n_grid(&c.n_grid)?;
    let setup = match c.model {
        ModelKind::MisspecBd { .. } => {
            let fitted = ModelKind::ReflectedBd;
            let proj = kl_minimizer(&fitted, &c.model, c.theta0, &default_theta_grid(&fitted))?;
            ConditionSetup::misspecified(fitted, proj.theta_star, c.model, c.theta0, c.init_mode)
        }
        _ => ConditionSetup::well_specified(c.model, c.theta0, c.init_mode, c.init.clone()),
    };
    let prior = default_prior(&setup.model, c.prior_a, c.prior_b)?;
    let pool = harness::pool(cli.workers)?;
    let report = harness::conditions(&pool, &setup, &prior, &ns, c.reps, c.seed)?;
    let slope = |f: &Option<pacvb_core::conditions::RateFit>| f.map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
    let summary = format!(
        "slopes of condition/n: (i) {}, (ii) {}, (iii) {}; ε_n ≈ {:.3e}·n^{:.3}",
        slope(&report.slope_i),
        slope(&report.slope_ii),
        slope(&report.slope_iii),
        report.epsilon_c,
        report.epsilon_exponent
    );
    let out = ConditionOutput { setup, prior, replications: c.reps, seed: c.seed, report };
    io::write_conditions(&cli.out, &out, cli.format)?;
    Ok(Outcome { summary })
}

/// Resolves an experiment config the way `certify` and `misspec` do.
pub fn resolve_experiment(
    config: Option<&Path>,
    seed: Option<u64>,
    a: &CertifyArgs,
    misspecified: bool,
) -> Result<ExperimentConfig, CliError> {
    let defaults = if misspecified { misspec_defaults() } else { certify_defaults() };
    let mut p = Patch::new();
    let mut flags = a.model.clone();
    if misspecified {
        p.set("misspec", flags.delta_m.take());
    }
    p.model(&flags)
        .set("theta0", a.theta0)
        .set("n", a.n)
        .set("alpha", a.alpha)
        .set("replications", a.replications)
        .set("epsilon", a.epsilon)
        .set("eta", a.eta)
        .mode(a.mode)
        .set("seed", seed);
    let (c, _): (ExperimentConfig, _) = resolve(defaults, config, p)?;
    if misspecified && c.misspec.is_none() {
        return Err(CliError::Config("misspec needs a δ_m (`misspec` in the config or --delta-m)".into()));
    }
    if !misspecified && c.misspec.is_some() {
        return Err(CliError::Config("config sets `misspec`; use the misspec subcommand".into()));
    }
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(c)
}

fn run_certify(cli: &Cli, cfg: Option<&Path>, a: &CertifyArgs, misspecified: bool) -> Result<Outcome, CliError> {
    let config = resolve_experiment(cfg, cli.seed, a, misspecified)?;
    if let EpsilonSource::FromConditions { .. } = config.epsilon_n {
        vlog(cli, || "computing ε_n from the conditions".to_string());
    }
    let pool = harness::pool(cli.workers)?;
    let report = harness::certify(&pool, &config)?;
    io::write_report(&cli.out, &report, cli.format)?;
    Ok(Outcome { summary: certify_summary(&report) })
}

pub fn certify_summary(r: &BoundReport) -> String {
    let mut s = format!(
        "coverage {:.4} (guaranteed {:.2}) over {}/{} replications; rhs = {}, ε_n = {}; Proposition coverage {:.4} (guaranteed {:.2})",
        r.coverage,
        r.guaranteed_level,
        r.completed,
        r.replications.len(),
        io::num(r.rhs),
        io::num(r.epsilon_n),
        r.prop21_coverage,
        r.prop21_level
    );
    if let Some(m) = &r.misspec {
        s.push_str(&format!("; θ* = {}", m.projection.theta_star));
    }
    if r.partial {
        s.push_str("; some replications failed");
    }
    s
}

#[derive(Serialize)]
struct LagEvent {
    lag: usize,
    #[serde(flatten)]
    event: AlphaEvent,
}

#[derive(Serialize)]
struct MixingOutput {
    params: Value,
    profile: MixingProfile,
    mixing_sum: f64,
    alpha_events: Vec<LagEvent>,
    drift: Option<DriftReport>,
}

fn run_mixing(cli: &Cli, cfg: Option<&Path>, a: &MixingArgs) -> Result<Outcome, CliError> {
    let defaults = json!({"model": {"kind": "finite_bd", "k": 10}, "theta": 0.35, "delta": 1.0, "max_lag": 10});
    let mut p = Patch::new();
    p.model(&a.model).set("theta", a.theta).set("delta", a.delta).set("max_lag", a.max_lag);
    let (m, params): (MixingParams, _) = resolve(defaults, cfg, p)?;
    let profile = model_profile(&m.model, m.theta)?;
    let sum = mixing_sum(&profile, m.delta);
    let alpha_events = match m.model {
        ModelKind::FiniteBd { k } if k <= 12 => (1..=m.max_lag)
            .map(|lag| Ok(LagEvent { lag, event: alpha_event_lb(&m.model, m.theta, lag)? }))
            .collect::<pacvb_core::Result<_>>()?,
        _ => Vec::new(),
    };
    let drift = match m.model {
        ModelKind::Ar1Gauss => Some(drift_check_ar1(m.theta, m.delta, &default_drift_grid())?),
        _ => None,
    };
    let mut summary = format!(
        "envelope {}·{}^k (period {}), mixing sum {}",
        io::num(profile.c),
        io::num(profile.r),
        profile.period,
        io::num(sum)
    );
    if let Some(d) = &drift {
        summary.push_str(&format!(
            "; drift {} (contraction {:.4}), analytic coefficient {:.4}",
            if d.holds { "holds" } else { "fails" },
            d.contraction,
            d.analytic_coefficient
        ));
    }
    if cli.format.json() {
        io::write_json(&cli.out.join("mixing.json"), &MixingOutput { params, profile, mixing_sum: sum, alpha_events, drift })?;
    }
    Ok(Outcome { summary })
}

/// Parses `args`, runs, prints, and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(o) => {
            println!("{}", o.summary);
            0
        }
        Err(e) => {
            eprintln!("pacvb: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_n_grid("16:128").unwrap(), vec![16, 32, 64, 128]);
        assert_eq!(parse_n_grid("16:100").unwrap(), vec![16, 32, 64]);
        assert_eq!(parse_n_grid("5, 7").unwrap(), vec![5, 7]);
        assert!(parse_n_grid("0:8").is_err());
        assert!(parse_n_grid("x").is_err());
    }

    #[test]
    fn named_model_replaces_and_bare_k_edits() {
        let base = json!({"model": {"kind": "finite_bd", "k": 10}});
        let mut p = Patch::new();
        p.model(&ModelFlags { model: Some(ModelName::Ar1Gauss), ..Default::default() });
        let (m, _): (Value, _) = resolve(base.clone(), None, p).unwrap();
        assert_eq!(m["model"], json!({"kind": "ar1_gauss"}));
        let mut p = Patch::new();
        p.model(&ModelFlags { k: Some(3), ..Default::default() });
        let (m, _): (Value, _) = resolve(base, None, p).unwrap();
        assert_eq!(m["model"], json!({"kind": "finite_bd", "k": 3}));
    }

    #[test]
    fn builtin_experiments_validate() {
        let a = CertifyArgs::default();
        assert!(resolve_experiment(None, None, &a, false).is_ok());
        assert!(resolve_experiment(None, None, &a, true).is_ok());
    }
}
