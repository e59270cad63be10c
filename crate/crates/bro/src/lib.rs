//! Bayesian risk optimization at desk scale.
//!
//! Data of unknown parametric law enter a conjugate posterior; a risk
//! functional (mean, mean-variance, VaR, or CVaR) of the posterior-induced
//! distribution of the expected cost `H(x, θ)` becomes the objective; the
//! objective is minimized over a compact decision box. Alongside the solver,
//! the crate ships the delta-method asymptotics of these objectives —
//! limiting scale `σ_x`, deterministic quantile biases, confidence
//! intervals — and a replication harness that checks the theory empirically:
//! consistency, pointwise and optimal-value normality, and interval coverage.
//!
//! Every sampling operation takes an explicit, splittable random stream;
//! experiments are byte-reproducible for a given seed, serial or parallel.

pub mod asymptotics;
pub mod bayes;
pub mod error;
pub mod harness;
pub mod model;
pub mod objective;
pub mod optimize;
pub mod parallel;
pub mod risk;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
