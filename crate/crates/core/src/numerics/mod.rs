//! Special functions, distributions and seeded sampling.
//!
//! Everything here is a pure function of its arguments; random draws take an
//! explicit [`RngStream`](rng::RngStream) so that independent streams can be
//! handed to independent workers.

pub mod dist;
pub mod rng;
pub mod sampling;
pub mod special;

pub use dist::{beta_pdf, f_cdf, f_quantile, f_sf, normal_pdf, FParams};
pub use rng::{RngStream, Seed};
pub use sampling::{sample_bernoulli, sample_beta, sample_normal, BetaSampler};
pub use special::{ln_beta, log_gamma, normal_cdf, reg_inc_beta};
