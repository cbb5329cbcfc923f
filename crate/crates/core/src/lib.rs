//! Surrogate-assisted CMA-ES whose surrogate relearning schedule is driven by
//! the Kullback-Leibler divergence between the surrogate's training
//! distribution and the optimizer's current search distribution.
//!
//! The crate is organised bottom-up:
//!
//! - [`distribution`]: Gaussian search distributions, whitening and KL.
//! - [`cmaes`]: the ask/tell CMA-ES.
//! - [`surrogate`]: Ranking-SVM surrogate on a covariance-adapted RBF kernel.
//! - [`schedule`]: the epoch controller (KL trust region, threshold update,
//!   hyper-parameter tuning) and the run loops built on it.
//! - [`benchmark`]: test functions with shift, rotation and power transforms.
//! - [`bfgs`]: finite-difference BFGS baseline.

pub mod benchmark;
pub mod bfgs;
pub mod cmaes;
pub mod distribution;
pub mod error;
pub mod record;
pub mod schedule;
pub mod surrogate;

pub use error::{Error, Result};
