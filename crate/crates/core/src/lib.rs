//! Simulation and analysis of case-mix shifts for clinical prediction models.
//!
//! The crate generates data from causal (prognosis), anti-causal (diagnosis)
//! and confounded (fork) prediction tasks, fits and evaluates models in terms
//! of discrimination and calibration, checks the transport properties of both
//! exactly on finite distributions, and runs the variance-ratio analysis of
//! AUC changes across external validation studies.

// `!(x > 0.0)` is used on purpose so NaN falls into the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod empirical;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod transport;

pub use error::{Error, Result};
pub use numerics::rng::{RngStream, Seed};
