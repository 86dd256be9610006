//! Bayesian probabilistic partial least squares (BPLS) regression.
//!
//! The latent-variable model `x = W z + ε`, `y = C z + η`, `z ~ N(0, I)`
//! is fitted by Gibbs sampling under a multiplicative gamma process
//! shrinkage prior on the loading columns, with optional spike-and-slab
//! (`ss-BPLS`) or Bayesian LASSO (`L-BPLS`) priors on the response
//! loadings. Predictions come from the Rao-Blackwellised posterior
//! predictive distribution.
//!
//! This crate is `no_std` and needs only `alloc`; file formats, the CLI
//! and the benchmark harness live in the companion `bpls` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod folds;
pub mod model;
pub mod numerics;
pub mod pls;
pub mod predict;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};
