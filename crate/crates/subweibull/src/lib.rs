//! Heavy-tailed (sub-Weibull) concentration and information-theoretic generalization toolkit.
//!
//! Each analytic bound has a companion Monte Carlo or exact-enumeration oracle in the tests.

pub mod align;
pub mod chaining;
pub mod circle_bench;
pub mod distlib;
pub mod divergence;
pub mod error;
pub mod genbounds;
pub mod numeric;
pub mod sgld_lab;
pub mod specfun;

pub use error::{Error, Result};
