//! Doubly robust estimation of average treatment effects with cross-fitting,
//! sensitivity bounds for unmeasured confounding, and collider-robust partial
//! identification over leave-k-out adjustment sets.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: the immutable [`Dataset`](data::Dataset), CSV ingestion and fold assignment.
//! - [`learners`]: nuisance regressions (OLS, IRLS logistic, Nadaraya–Watson, perturbed oracles).
//! - [`estimators`]: cross-fitting plus plugin, IPW, 1-NN matching and AIPW estimators.
//! - [`sensitivity`]: intervals for the causal effect under bounded confounding bias.
//! - [`collider_bounds`]: the leave-k-out sweep over candidate collider sets.
//! - [`simlab`]: data-generating processes with known truth and the Monte Carlo engine.
//! - [`rates`]: closed-form convergence-rate exponents.
//! - [`cli`]: report-producing entry points used by the `drbounds` binary.

pub mod cli;
pub mod collider_bounds;
pub mod data;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod quadrature;
pub mod rates;
pub mod seeds;
pub mod sensitivity;
pub mod simlab;
pub(crate) mod stats;

pub use error::{Error, Result};
