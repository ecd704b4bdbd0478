//! Birth–death kernels on {0, 1, …} with a forced move out of 0, optionally
//! capped at a top state with a forced move down.

use crate::error::{Error, Result};
use crate::prelude::*;

pub(crate) const MISSPEC_CLIP: (f64, f64) = (0.01, 0.49);

/// A birth–death transition kernel. Birth means i → i+1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdChain {
    top: Option<usize>,
    theta: f64,
    /// Period-2 perturbation of the birth probability; zero for the plain chains.
    delta: f64,
}

impl BdChain {
    pub fn finite(k: usize, theta: f64) -> Self {
        BdChain { top: Some(k), theta, delta: 0.0 }
    }

    pub fn reflected(theta: f64) -> Self {
        BdChain { top: None, theta, delta: 0.0 }
    }

    pub fn alternating(theta: f64, delta: f64) -> Self {
        BdChain { top: None, theta, delta }
    }

    pub fn top(&self) -> Option<usize> {
        self.top
    }

    pub fn is_forced(&self, i: usize) -> bool {
        i == 0 || Some(i) == self.top
    }

    /// Probability of i → i+1.
    pub fn birth(&self, i: usize) -> f64 {
        if i == 0 {
            return 1.0;
        }
        if Some(i) == self.top {
            return 0.0;
        }
        if self.delta == 0.0 {
            return self.theta;
        }
        let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
        (self.theta + sign * self.delta).clamp(MISSPEC_CLIP.0, MISSPEC_CLIP.1)
    }

    /// Birth probability in the interior by parity of the state: [even, odd].
    pub fn interior_births(&self) -> [f64; 2] {
        [self.birth(2), self.birth(1)]
    }

    /// log p(y | x); −∞ for impossible moves.
    pub fn step_logmass(&self, x: usize, y: usize) -> f64 {
        let b = self.birth(x);
        if y == x + 1 {
            b.ln()
        } else if x > 0 && y == x - 1 {
            (1.0 - b).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Unnormalized invariant log-masses from detailed balance, with a
    /// geometric tail estimate for unbounded chains.
    fn unnormalized_invariant(&self) -> Result<(Vec<f64>, f64)> {
        let mut logm = vec![0.0];
        if let Some(k) = self.top {
            for i in 1..=k {
                let up = self.birth(i - 1).ln();
                let down = if i == k { 0.0 } else { (1.0 - self.birth(i)).ln() };
                let prev = logm[i - 1];
                logm.push(prev + up - down);
            }
            return Ok((logm, 0.0));
        }
        let [be, bo] = self.interior_births();
        let two_step = (be * bo) / ((1.0 - be) * (1.0 - bo));
        if !(two_step < 1.0) {
            return Err(Error::NonErgodic { model: "birth-death", theta: self.theta });
        }
        let mut sum = 1.0f64;
        let mut i = 1usize;
        loop {
            let prev = logm[i - 1];
            let next = prev + self.birth(i - 1).ln() - (1.0 - self.birth(i)).ln();
            logm.push(next);
            let mass = next.exp();
            sum += mass;
            if i > 4 && mass < 1e-18 * sum {
                break;
            }
            i += 1;
            if i > 100_000 {
                return Err(Error::Truncation { ceiling: i, tail: mass / sum });
            }
        }
        // masses beyond the last index continue geometrically with ratio two_step per two states
        let l = logm.len() - 1;
        let next1 = logm[l] + self.birth(l).ln() - (1.0 - self.birth(l + 1)).ln();
        let next2 = next1 + self.birth(l + 1).ln() - (1.0 - self.birth(l + 2)).ln();
        let tail = (next1.exp() + next2.exp()) / (1.0 - two_step);
        Ok((logm, tail))
    }

    /// Invariant law; masses beyond the stored support sum to below 1e-14.
    pub fn invariant(&self) -> Result<Vec<f64>> {
        let (logm, tail) = self.unnormalized_invariant()?;
        let total: f64 = logm.iter().map(|v| v.exp()).sum::<f64>() + tail;
        let mut q: Vec<f64> = logm.iter().map(|v| v.exp() / total).collect();
        while q.len() > 1 && *q.last().unwrap() < 1e-300 {
            q.pop();
        }
        Ok(q)
    }

    /// log of the invariant mass at x.
    pub fn log_invariant(&self, x: usize) -> Result<f64> {
        if let Some(k) = self.top {
            if x > k {
                return Ok(f64::NEG_INFINITY);
            }
        }
        let (logm, tail) = self.unnormalized_invariant()?;
        let total: f64 = logm.iter().map(|v| v.exp()).sum::<f64>() + tail;
        let mut lm = if x < logm.len() { logm[x] } else { *logm.last().unwrap() };
        for i in logm.len()..=x {
            lm += self.birth(i - 1).ln() - (1.0 - self.birth(i)).ln();
        }
        Ok(lm - total.ln())
    }

    /// log q(i) for i = 0..=upto (clamped to the top state).
    pub fn log_invariant_upto(&self, upto: usize) -> Result<Vec<f64>> {
        let (mut logm, tail) = self.unnormalized_invariant()?;
        let total = logm.iter().map(|v| v.exp()).sum::<f64>() + tail;
        let last = match self.top {
            Some(k) => upto.min(k),
            None => upto,
        };
        logm.truncate(last + 1);
        for i in logm.len()..=last {
            let prev = logm[i - 1];
            logm.push(prev + self.birth(i - 1).ln() - (1.0 - self.birth(i)).ln());
        }
        let lt = total.ln();
        for v in logm.iter_mut() {
            *v -= lt;
        }
        Ok(logm)
    }

    /// One step of the forward equation; the vector grows by one state for
    /// unbounded chains and negligible trailing mass is dropped.
    pub fn push_forward(&self, p: &[f64]) -> Vec<f64> {
        let cap = match self.top {
            Some(k) => k + 1,
            None => p.len() + 1,
        };
        let mut out = vec![0.0; cap];
        for (i, &w) in p.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let b = self.birth(i);
            if b > 0.0 {
                out[i + 1] += w * b;
            }
            if i > 0 && b < 1.0 {
                out[i - 1] += w * (1.0 - b);
            }
        }
        if self.top.is_none() {
            while out.len() > 1 && *out.last().unwrap() < 1e-17 {
                out.pop();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflected_invariant_closed_form() {
        let th = 0.3;
        let q = BdChain::reflected(th).invariant().unwrap();
        let q0 = (1.0 - 2.0 * th) / (2.0 * (1.0 - th));
        assert!((q[0] - q0).abs() < 1e-15);
        let r = th / (1.0 - th);
        for (i, &qi) in q.iter().enumerate().skip(1).take(30) {
            let want = q0 * r.powi(i as i32 - 1) / (1.0 - th);
            assert!((qi - want).abs() < 1e-15, "i={i}");
        }
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((BdChain::reflected(th).log_invariant(45).unwrap() - (q0 * r.powi(44) / (1.0 - th)).ln()).abs() < 1e-12);
    }

    #[test]
    fn invariant_is_fixed_point() {
        for chain in [BdChain::finite(6, 0.7), BdChain::reflected(0.42), BdChain::alternating(0.3, 0.1)] {
            let q = chain.invariant().unwrap();
            let next = chain.push_forward(&q);
            let diff: f64 = (0..next.len().max(q.len()))
                .map(|i| (next.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
                .sum();
            assert!(diff < 1e-12, "{chain:?}: {diff}");
        }
    }

    #[test]
    fn alternating_births_clip() {
        let c = BdChain::alternating(0.3, 0.1);
        let [e, o] = c.interior_births();
        assert!((e - 0.4).abs() < 1e-15 && (o - 0.2).abs() < 1e-15);
        let c = BdChain::alternating(0.45, 0.1);
        assert_eq!(c.birth(2), 0.49);
    }
}
