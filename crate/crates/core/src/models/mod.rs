//! The parameterized chains: finite and reflected birth–death, Gaussian AR(1),
//! and a period-2 misspecified birth–death source.

mod bd;

pub use bd::BdChain;

use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::prelude::*;
use crate::rng::{from_seed, StreamRng};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ModelKind {
    /// States 0..=k, reflecting deterministically at both ends.
    FiniteBd { k: usize },
    /// States 0, 1, …, reflecting at 0.
    ReflectedBd,
    /// X_i = θ X_{i-1} + W_i with standard normal noise.
    Ar1Gauss,
    /// Reflected birth–death with birth θ + δ(−1)^i at state i, clipped to [0.01, 0.49].
    MisspecBd { delta_m: f64 },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::FiniteBd { .. } => "finite_bd",
            ModelKind::ReflectedBd => "reflected_bd",
            ModelKind::Ar1Gauss => "ar1_gauss",
            ModelKind::MisspecBd { .. } => "misspec_bd",
        }
    }

    pub fn is_birth_death(&self) -> bool {
        !matches!(self, ModelKind::Ar1Gauss)
    }

    /// Open interval of admissible parameters.
    pub fn theta_range(&self) -> (f64, f64) {
        match self {
            ModelKind::FiniteBd { .. } => (0.0, 1.0),
            ModelKind::ReflectedBd | ModelKind::MisspecBd { .. } => (0.0, 0.5),
            ModelKind::Ar1Gauss => (-1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelKind::FiniteBd { k } if k < 2 => Err(Error::param(format!("finite chain needs k ≥ 2, got {k}"))),
            ModelKind::MisspecBd { delta_m } if !delta_m.is_finite() => {
                Err(Error::param("misspecification amplitude must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        self.validate()?;
        let (lo, hi) = self.theta_range();
        if !(theta > lo && theta < hi) {
            return Err(Error::param(format!("{}: θ = {theta} outside ({lo}, {hi})", self.name())));
        }
        if let ModelKind::MisspecBd { delta_m } = *self {
            let (clo, chi) = bd::MISSPEC_CLIP;
            let (e, o) = (theta + delta_m, theta - delta_m);
            if !(e > 0.0 && e < 1.0 && o > 0.0 && o < 1.0) || (e.clamp(clo, chi) != e && o.clamp(clo, chi) != o) {
                return Err(Error::param(format!(
                    "misspec births {e}, {o} leave the clipping range [{clo}, {chi}] on both parities"
                )));
            }
        }
        Ok(())
    }

    /// The birth–death kernel at θ.
    pub fn chain(&self, theta: f64) -> Result<BdChain> {
        self.check_theta(theta)?;
        match *self {
            ModelKind::FiniteBd { k } => Ok(BdChain::finite(k, theta)),
            ModelKind::ReflectedBd => Ok(BdChain::reflected(theta)),
            ModelKind::MisspecBd { delta_m } => Ok(BdChain::alternating(theta, delta_m)),
            ModelKind::Ar1Gauss => Err(Error::param("AR(1) has no birth–death kernel")),
        }
    }
}

/// A probability law over states.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "law", rename_all = "snake_case"))]
pub enum Distribution {
    /// Masses on 0, 1, 2, …
    Discrete {
        masses: Vec<f64>,
    },
    Gaussian {
        mean: f64,
        var: f64,
    },
}

impl Distribution {
    pub fn point(kind: &ModelKind, x: f64) -> Result<Self> {
        if kind.is_birth_death() {
            let i = state_index(x)?;
            let mut masses = vec![0.0; i + 1];
            masses[i] = 1.0;
            Ok(Distribution::Discrete { masses })
        } else {
            Ok(Distribution::Gaussian { mean: x, var: 0.0 })
        }
    }

    pub fn masses(&self) -> Option<&[f64]> {
        match self {
            Distribution::Discrete { masses } => Some(masses),
            Distribution::Gaussian { .. } => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Discrete { masses } => masses.iter().enumerate().map(|(i, m)| i as f64 * m).sum(),
            Distribution::Gaussian { mean, .. } => *mean,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Distribution::Discrete { masses } => masses.iter().enumerate().map(|(i, m)| (i * i) as f64 * m).sum(),
            Distribution::Gaussian { mean, var } => mean * mean + var,
        }
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Distribution::Discrete { masses } => {
                let total: f64 = masses.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (i, &m) in masses.iter().enumerate() {
                    if u < m {
                        return i as f64;
                    }
                    u -= m;
                }
                (masses.iter().rposition(|&m| m > 0.0).unwrap_or(0)) as f64
            }
            Distribution::Gaussian { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
        }
    }
}

/// How X_0 is distributed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "init", content = "value", rename_all = "snake_case"))]
pub enum InitLaw {
    /// The invariant law of the generating parameter.
    Invariant,
    Point(f64),
    Custom(Distribution),
}

/// Whether the two path laws in a likelihood ratio share their initial law
/// (the ratio has no X_0 term) or each starts from its own invariant law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitMode {
    Shared,
    InvariantPair,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub theta: f64,
    pub init: InitLaw,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, theta: f64, init: InitLaw) -> Result<Self> {
        kind.check_theta(theta)?;
        Ok(ModelSpec { kind, theta, init })
    }

    pub fn simulate(&self, n: usize, seed: u64) -> Result<Trajectory> {
        simulate(&self.kind, self.theta, &self.init, n, seed)
    }
}

/// The misspecified source: birth θ0 + δ(−1)^i at state i ≥ 1, clipped.
pub fn misspec_source(theta0: f64, delta_m: f64) -> Result<ModelSpec> {
    ModelSpec::new(ModelKind::MisspecBd { delta_m }, theta0, InitLaw::Invariant)
}

/// Move counts of a birth–death path. Counts are split by the parity of the
/// state the move starts from; forced moves (out of 0 or the top) are separate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BdStats {
    pub x0: usize,
    pub up: [u64; 2],
    pub down: [u64; 2],
    pub forced: u64,
}

impl BdStats {
    pub fn ups(&self) -> u64 {
        self.up[0] + self.up[1]
    }

    pub fn downs(&self) -> u64 {
        self.down[0] + self.down[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ar1Stats {
    pub x0: f64,
    /// Σ x_i x_{i-1}
    pub sxx: f64,
    /// Σ x_{i-1}²
    pub sx2: f64,
    /// Σ x_i²
    pub sy2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "stats", rename_all = "snake_case"))]
pub enum SuffStats {
    BirthDeath(BdStats),
    Ar1(Ar1Stats),
}

/// An observed path x_0, …, x_n with its sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub states: Vec<f64>,
    pub stats: SuffStats,
}

fn state_index(x: f64) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 && x < 1e15 {
        Ok(x as usize)
    } else {
        Err(Error::Domain { what: "birth-death state", value: x })
    }
}

impl Trajectory {
    /// Builds a trajectory, checking that every move is feasible for `kind`.
    pub fn from_states(kind: &ModelKind, states: Vec<f64>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::param("a trajectory needs at least two states"));
        }
        if !kind.is_birth_death() {
            if states.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("AR(1) trajectory has non-finite entries"));
            }
            let mut s = Ar1Stats { x0: states[0], ..Default::default() };
            for w in states.windows(2) {
                s.sxx += w[0] * w[1];
                s.sx2 += w[0] * w[0];
                s.sy2 += w[1] * w[1];
            }
            return Ok(Trajectory { states, stats: SuffStats::Ar1(s) });
        }
        kind.validate()?;
        let top = match kind {
            ModelKind::FiniteBd { k } => Some(*k),
            _ => None,
        };
        let mut s = BdStats { x0: state_index(states[0])?, ..Default::default() };
        for w in states.windows(2) {
            let (x, y) = (state_index(w[0])?, state_index(w[1])?);
            if top.is_some_and(|k| y > k || x > k) {
                return Err(Error::param(format!("state beyond top in move {x} → {y}")));
            }
            let forced = x == 0 || Some(x) == top;
            if y == x + 1 || (x > 0 && y + 1 == x) {
                if forced {
                    if (x == 0 && y != 1) || (Some(x) == top && y + 1 != x) {
                        return Err(Error::param(format!("boundary move {x} → {y} is impossible")));
                    }
                    s.forced += 1;
                } else if y > x {
                    s.up[x % 2] += 1;
                } else {
                    s.down[x % 2] += 1;
                }
            } else {
                return Err(Error::param(format!("move {x} → {y} is not a ±1 step")));
            }
        }
        Ok(Trajectory { states, stats: SuffStats::BirthDeath(s) })
    }

    pub fn n(&self) -> usize {
        self.states.len() - 1
    }

    pub fn x0(&self) -> f64 {
        self.states[0]
    }

    pub fn bd_stats(&self) -> Option<&BdStats> {
        match &self.stats {
            SuffStats::BirthDeath(s) => Some(s),
            SuffStats::Ar1(_) => None,
        }
    }

    pub fn ar1_stats(&self) -> Option<&Ar1Stats> {
        match &self.stats {
            SuffStats::Ar1(s) => Some(s),
            SuffStats::BirthDeath(_) => None,
        }
    }
}

/// log p_θ(y | x). Impossible transitions give −∞.
pub fn step_logdensity(kind: &ModelKind, theta: f64, x: f64, y: f64) -> Result<f64> {
    kind.check_theta(theta)?;
    if let ModelKind::Ar1Gauss = kind {
        let e = y - theta * x;
        return Ok(-HALF_LN_2PI - 0.5 * e * e);
    }
    let chain = kind.chain(theta)?;
    let (Ok(i), Ok(j)) = (state_index(x), state_index(y)) else {
        return Ok(f64::NEG_INFINITY);
    };
    if chain.top().is_some_and(|k| i > k) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(chain.step_logmass(i, j))
}

/// The invariant law at θ (masses beyond the stored support sum below 1e-14).
pub fn invariant(kind: &ModelKind, theta: f64) -> Result<Distribution> {
    kind.check_theta(theta)?;
    match kind {
        ModelKind::Ar1Gauss => Ok(Distribution::Gaussian { mean: 0.0, var: 1.0 / (1.0 - theta * theta) }),
        _ => Ok(Distribution::Discrete { masses: kind.chain(theta)?.invariant()? }),
    }
}

/// log q_θ(x) for the invariant law.
pub fn invariant_logdensity(kind: &ModelKind, theta: f64, x: f64) -> Result<f64> {
    kind.check_theta(theta)?;
    match kind {
        ModelKind::Ar1Gauss => {
            let p = 1.0 - theta * theta;
            Ok(0.5 * p.ln() - HALF_LN_2PI - 0.5 * p * x * x)
        }
        _ => match state_index(x) {
            Ok(i) => kind.chain(theta)?.log_invariant(i),
            Err(_) => Ok(f64::NEG_INFINITY),
        },
    }
}

/// The invariant log-mass of a plain birth–death chain written as
/// `konst + c_log·ln θ + c_log1m·ln(1−θ) + c_log1m2·ln(1−2θ) − [ln Z(θ)]`,
/// where the bracketed normalizer is present only for the finite chain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogLinearMass {
    pub konst: f64,
    pub c_log: f64,
    pub c_log1m: f64,
    pub c_log1m2: f64,
    pub needs_normalizer: bool,
}

impl LogLinearMass {
    pub fn eval_unnormalized(&self, theta: f64) -> f64 {
        let mut v = self.konst;
        if self.c_log != 0.0 {
            v += self.c_log * theta.ln();
        }
        if self.c_log1m != 0.0 {
            v += self.c_log1m * (1.0 - theta).ln();
        }
        if self.c_log1m2 != 0.0 {
            v += self.c_log1m2 * (1.0 - 2.0 * theta).ln();
        }
        v
    }
}

/// Log-linear form of the invariant mass at state x.
pub fn invariant_log_form(kind: &ModelKind, x: usize) -> Result<LogLinearMass> {
    let xf = x as f64;
    match *kind {
        ModelKind::ReflectedBd => Ok(if x == 0 {
            LogLinearMass { konst: -core::f64::consts::LN_2, c_log1m: -1.0, c_log1m2: 1.0, ..Default::default() }
        } else {
            LogLinearMass {
                konst: -core::f64::consts::LN_2,
                c_log: xf - 1.0,
                c_log1m: -(xf + 1.0),
                c_log1m2: 1.0,
                needs_normalizer: false,
            }
        }),
        ModelKind::FiniteBd { k } => {
            let (c_log, c_log1m) = if x == 0 {
                (0.0, 0.0)
            } else if x < k {
                (xf - 1.0, -xf)
            } else if x == k {
                (xf - 1.0, -(xf - 1.0))
            } else {
                return Err(Error::param(format!("state {x} beyond top {k}")));
            };
            Ok(LogLinearMass { c_log, c_log1m, needs_normalizer: true, ..Default::default() })
        }
        _ => Err(Error::param(format!("{} has no log-linear invariant form", kind.name()))),
    }
}

/// ln Z(θ) of the finite chain: ln Σ_x exp(form_x(θ)).
pub fn finite_log_normalizer(k: usize, theta: f64) -> f64 {
    let (lt, l1) = (theta.ln(), (1.0 - theta).ln());
    let terms = (0..=k).map(|x| {
        let xf = x as f64;
        if x == 0 {
            0.0
        } else if x < k {
            (xf - 1.0) * lt - xf * l1
        } else {
            (xf - 1.0) * (lt - l1)
        }
    });
    log_sum_exp(terms)
}

pub(crate) fn log_sum_exp<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let v: Vec<f64> = it.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Resolves an initial law at the generating parameter θ.
pub fn resolve_init(kind: &ModelKind, theta: f64, init: &InitLaw) -> Result<Distribution> {
    match init {
        InitLaw::Invariant => invariant(kind, theta),
        InitLaw::Point(x) => Distribution::point(kind, *x),
        InitLaw::Custom(d) => {
            match (kind.is_birth_death(), d) {
                (true, Distribution::Discrete { masses }) => {
                    let total: f64 = masses.iter().sum();
                    if masses.iter().any(|m| !(*m >= 0.0)) || !(total > 0.0) {
                        return Err(Error::param("custom initial masses must be non-negative with positive total"));
                    }
                    if let ModelKind::FiniteBd { k } = kind {
                        if masses.len() > k + 1 && masses[k + 1..].iter().any(|m| *m > 0.0) {
                            return Err(Error::param("custom initial law puts mass beyond the top state"));
                        }
                    }
                }
                (false, Distribution::Gaussian { var, .. }) if *var >= 0.0 => {}
                _ => return Err(Error::param("custom initial law does not match the state space")),
            }
            Ok(d.clone())
        }
    }
}

/// Simulates x_0, …, x_n under θ from the stream seeded by `seed`.
pub fn simulate(kind: &ModelKind, theta: f64, init: &InitLaw, n: usize, seed: u64) -> Result<Trajectory> {
    let mut rng = from_seed(seed);
    simulate_with(kind, theta, init, n, &mut rng)
}

/// As [`simulate`], drawing from a caller-owned stream.
pub fn simulate_with(kind: &ModelKind, theta: f64, init: &InitLaw, n: usize, rng: &mut StreamRng) -> Result<Trajectory> {
    if n < 1 {
        return Err(Error::param("path length must be at least 1"));
    }
    kind.check_theta(theta)?;
    let start = resolve_init(kind, theta, init)?.sample(rng);
    let mut states = Vec::with_capacity(n + 1);
    states.push(start);
    if let ModelKind::Ar1Gauss = kind {
        let mut x = start;
        let mut s = Ar1Stats { x0: start, ..Default::default() };
        for _ in 0..n {
            let w: f64 = rng.sample(StandardNormal);
            let y = theta * x + w;
            s.sxx += x * y;
            s.sx2 += x * x;
            s.sy2 += y * y;
            states.push(y);
            x = y;
        }
        return Ok(Trajectory { states, stats: SuffStats::Ar1(s) });
    }
    let chain = kind.chain(theta)?;
    let mut x = start as usize;
    let mut s = BdStats { x0: x, ..Default::default() };
    for _ in 0..n {
        let b = chain.birth(x);
        let forced = chain.is_forced(x);
        let up = if forced { b > 0.5 } else { rng.random::<f64>() < b };
        if forced {
            s.forced += 1;
        } else if up {
            s.up[x % 2] += 1;
        } else {
            s.down[x % 2] += 1;
        }
        x = if up { x + 1 } else { x - 1 };
        states.push(x as f64);
    }
    Ok(Trajectory { states, stats: SuffStats::BirthDeath(s) })
}

/// Σ_i log p_θ(x_i | x_{i-1}) from the sufficient statistics.
pub fn path_loglik(kind: &ModelKind, theta: f64, traj: &Trajectory) -> Result<f64> {
    kind.check_theta(theta)?;
    match (&traj.stats, kind) {
        (SuffStats::Ar1(s), ModelKind::Ar1Gauss) => {
            let n = traj.n() as f64;
            Ok(-n * HALF_LN_2PI - 0.5 * (s.sy2 - 2.0 * theta * s.sxx + theta * theta * s.sx2))
        }
        (SuffStats::BirthDeath(s), _) if kind.is_birth_death() => {
            let [be, bo] = kind.chain(theta)?.interior_births();
            let term = |count: u64, p: f64| if count == 0 { 0.0 } else { count as f64 * p.ln() };
            Ok(term(s.up[0], be) + term(s.down[0], 1.0 - be) + term(s.up[1], bo) + term(s.down[1], 1.0 - bo))
        }
        _ => Err(Error::param(format!("trajectory statistics do not match model {}", kind.name()))),
    }
}

/// r_n(θ, θ0) = log p_θ0(path) − log p_θ(path), plus the initial-law term
/// under [`InitMode::InvariantPair`]. Infeasible paths give ±∞.
pub fn loglik_ratio(kind: &ModelKind, theta: f64, theta0: f64, traj: &Trajectory, mode: InitMode) -> Result<f64> {
    loglik_ratio_between(kind, theta, kind, theta0, traj, mode)
}

/// Log-likelihood ratio of a source law (kind0, θ0) against a model law
/// (kind, θ) on the same path.
pub fn loglik_ratio_between(
    kind: &ModelKind,
    theta: f64,
    kind0: &ModelKind,
    theta0: f64,
    traj: &Trajectory,
    mode: InitMode,
) -> Result<f64> {
    if kind == kind0 && theta == theta0 {
        kind.check_theta(theta)?;
        return Ok(0.0);
    }
    let l0 = path_loglik(kind0, theta0, traj)?;
    let l = path_loglik(kind, theta, traj)?;
    let mut r = diff_logs(l0, l);
    if mode == InitMode::InvariantPair {
        let x0 = traj.x0();
        let z = diff_logs(invariant_logdensity(kind0, theta0, x0)?, invariant_logdensity(kind, theta, x0)?);
        r = if r.is_nan() || z.is_nan() { f64::NAN } else { r + z };
    }
    Ok(r)
}

fn diff_logs(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

/// Laws of X_0, …, X_n when X_0 ~ init and the chain runs at θ.
pub fn marginals(kind: &ModelKind, theta: f64, init: &Distribution, n: usize) -> Result<Vec<Distribution>> {
    kind.check_theta(theta)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(init.clone());
    match (kind, init) {
        (ModelKind::Ar1Gauss, Distribution::Gaussian { mean, var }) => {
            let (mut m, mut v) = (*mean, *var);
            for _ in 0..n {
                m *= theta;
                v = theta * theta * v + 1.0;
                out.push(Distribution::Gaussian { mean: m, var: v });
            }
        }
        (_, Distribution::Discrete { masses }) if kind.is_birth_death() => {
            let chain = kind.chain(theta)?;
            let mut p = masses.clone();
            for _ in 0..n {
                p = chain.push_forward(&p);
                out.push(Distribution::Discrete { masses: p.clone() });
            }
        }
        _ => return Err(Error::param("initial law does not match the state space")),
    }
    Ok(out)
}

/// Standard normal density, used by quadrature oracles.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}
