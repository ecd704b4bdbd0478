//! Rényi divergence between birth–death path laws by a transfer product.
//!
//! Σ over paths of p_src^{1−α} p_θ^α factorizes into initial weights times
//! n applications of the matrix T(i, j) = p_src(j|i)^{1−α} p_θ(j|i)^α.

use crate::error::{Error, Result};
use crate::models::BdChain;
use crate::prelude::*;

const MAX_CEILING: usize = 1 << 20;
const LEAK_TOLERANCE: f64 = 1e-12;

/// Initial weights on 0..=L: either explicit masses or log-weights given by a
/// function of the state.
pub(crate) enum InitialWeights<'a> {
    Masses(&'a [f64]),
    /// q_θ(i)^α q_src(i)^{1−α} from the two invariant laws.
    Invariant,
}

/// log Σ_paths p_src^{1−α} p_θ^α over paths of length n.
pub(crate) fn log_transfer_total(
    model: &BdChain,
    source: &BdChain,
    init: InitialWeights<'_>,
    n: usize,
    alpha: f64,
) -> Result<f64> {
    let top = match (model.top(), source.top()) {
        (Some(a), Some(b)) if a == b => Some(a),
        (None, None) => None,
        _ => return Err(Error::param("model and source chains have different state spaces")),
    };
    if let Some(k) = top {
        let (w0, _) = initial(&init, k, model, source, alpha)?;
        let (total, _) = run(model, source, &w0, n, alpha, k, true);
        return Ok(total);
    }
    let support = match &init {
        InitialWeights::Masses(m) => m.len(),
        InitialWeights::Invariant => 32,
    };
    let mut ceiling = (support + 16).max(64).min(support + n);
    loop {
        let (w0, init_tail) = initial(&init, ceiling, model, source, alpha)?;
        let (total, leak) = run(model, source, &w0, n, alpha, ceiling, false);
        let leak = log_add(leak, init_tail);
        let rel = (leak - total).exp();
        if rel < LEAK_TOLERANCE || (leak == f64::NEG_INFINITY) {
            return Ok(total);
        }
        if ceiling >= MAX_CEILING {
            return Err(Error::Truncation { ceiling, tail: rel });
        }
        ceiling *= 2;
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Initial weights on 0..=ceiling and the log of the weight left out.
fn initial(init: &InitialWeights<'_>, ceiling: usize, model: &BdChain, source: &BdChain, alpha: f64) -> Result<(Vec<f64>, f64)> {
    match init {
        InitialWeights::Masses(m) => {
            let kept = m.len().min(ceiling + 1);
            let rest: f64 = m[kept..].iter().sum();
            let mut w = m[..kept].to_vec();
            w.resize(ceiling + 1, 0.0);
            Ok((w, if rest > 0.0 { rest.ln() } else { f64::NEG_INFINITY }))
        }
        InitialWeights::Invariant => {
            let lq = model.log_invariant_upto(ceiling + 2)?;
            let lq0 = source.log_invariant_upto(ceiling + 2)?;
            let lw: Vec<f64> = lq.iter().zip(&lq0).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
            let mut w: Vec<f64> = lw.iter().take(ceiling + 1).map(|v| v.exp()).collect();
            w.resize(ceiling + 1, 0.0);
            if model.top().is_some() || lw.len() < ceiling + 3 {
                return Ok((w, f64::NEG_INFINITY));
            }
            // beyond the ceiling the weights fall geometrically per two states
            let [be, bo] = model.interior_births();
            let [se, so] = source.interior_births();
            let r_model = (be * bo / ((1.0 - be) * (1.0 - bo))).ln();
            let r_source = (se * so / ((1.0 - se) * (1.0 - so))).ln();
            let log_ratio = alpha * r_model + (1.0 - alpha) * r_source;
            let pair = log_add(lw[ceiling + 1], lw[ceiling + 2]);
            Ok((w, pair - (-(log_ratio.exp())).ln_1p()))
        }
    }
}

/// Runs the transfer recursion on 0..=ceiling. Returns (log total, log leaked
/// weight). With `closed` the top state reflects and nothing leaks.
fn run(model: &BdChain, source: &BdChain, w0: &[f64], n: usize, alpha: f64, ceiling: usize, closed: bool) -> (f64, f64) {
    let size = ceiling + 1;
    let beta = 1.0 - alpha;
    let mut up = vec![0.0; size];
    let mut down = vec![0.0; size];
    for i in 0..size {
        let (b, b0) = (model.birth(i), source.birth(i));
        up[i] = mix(b0, b, beta, alpha);
        down[i] = if i == 0 { 0.0 } else { mix(1.0 - b0, 1.0 - b, beta, alpha) };
    }
    let mut w = w0.to_vec();
    let mut log_scale = 0.0;
    let mut leak = f64::NEG_INFINITY;
    let mut next = vec![0.0; size];
    let s: f64 = w.iter().sum();
    if !(s > 0.0) {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY);
    }
    for v in w.iter_mut() {
        *v /= s;
    }
    log_scale += s.ln();
    // highest state carrying weight, to skip the empty tail
    let mut reach = w.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    for _ in 0..n {
        next[..size].iter_mut().for_each(|v| *v = 0.0);
        let mut spilled = 0.0;
        for i in 0..=reach {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            if i + 1 < size {
                next[i + 1] += wi * up[i];
            } else if !closed {
                spilled += wi * up[i];
            }
            if i > 0 {
                next[i - 1] += wi * down[i];
            }
        }
        reach = (reach + 1).min(size - 1);
        let s: f64 = next[..=reach].iter().sum();
        if spilled > 0.0 {
            leak = log_add(leak, spilled.ln() + log_scale);
        }
        if !(s > 0.0) {
            return (f64::NEG_INFINITY, leak);
        }
        for v in next[..=reach].iter_mut() {
            *v /= s;
        }
        log_scale += s.ln();
        core::mem::swap(&mut w, &mut next);
    }
    (log_scale, leak)
}

/// p0^β p^α with the conventions 0^x = 0 for x > 0.
fn mix(p0: f64, p: f64, beta: f64, alpha: f64) -> f64 {
    if p0 == 0.0 || p == 0.0 {
        0.0
    } else if p0 == p {
        p
    } else {
        (beta * p0.ln() + alpha * p.ln()).exp()
    }
}
