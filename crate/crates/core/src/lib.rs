//! Simulation and verification laboratory for Gaussian random fields with
//! stationary increments and variance scale `σ(r) = r^H (log 1/r)^γ`.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]
// Reference constants are kept at the precision the oracle printed them.
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod construction_lab;
pub mod covering_lab;
pub mod error;
pub mod hitting_mc;
pub mod quadrature;
pub mod rng;
pub mod sojourn_lab;
pub mod stats;
pub mod spectral_field;
pub mod variance_model;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
