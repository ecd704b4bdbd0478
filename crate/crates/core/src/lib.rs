//! Tempered-posterior variational Bayes for parameterized Markov chains, with
//! the machinery to check PAC-Bayes risk bounds numerically.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation: special functions, the Beta variational family, the Markov
//! models and their path divergences, mixing envelopes, KL-VB fitting, the
//! sufficient-condition checks and the per-replication certification step.
//! File formats, the parallel harness and the CLI live in the `pacvb` crate.

#![no_std]
// NaN must fail every domain check, which `!(x > 0.0)` does and `x <= 0.0` does not
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod prelude;

pub mod beta;
pub mod certify;
pub mod conditions;
pub mod divergence;
pub mod error;
pub mod linalg;
pub mod mixing;
pub mod models;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod variational;

pub use beta::{BetaLaw, FamilyLaw, ScaledBetaLaw};
pub use error::{Error, Result};
pub use models::{InitLaw, InitMode, ModelKind, ModelSpec, Trajectory};
