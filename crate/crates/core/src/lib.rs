//! Hypothesis tests built on the accept-reject sampling step.
//!
//! The test statistic is the expected acceptance rate of rejection
//! sampling with the null density as target and a data-driven density as
//! proposal: observations that the null explains as well as the proposal
//! accept with probability one, the rest with probability equal to their
//! likelihood ratio. The crate provides the goodness-of-fit, group-mean
//! equality, and fixed mean-vector statistics, exact Poisson binomial
//! machinery for credible intervals, Monte Carlo calibration, classical
//! baseline tests, and a scenario harness for size and power studies.

pub mod ar;
pub mod baselines;
pub mod density_estimation;
pub mod distributions;
pub mod error;
pub mod mc;
pub mod poisson_binomial;
pub mod power;
pub mod rng;
pub mod sample;

pub use error::{Error, Result};
pub use sample::Sample;
