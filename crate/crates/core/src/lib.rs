//! Joint service caching and task offloading for dense multi-cell mobile
//! edge networks.
//!
//! - [`model`]: topology, service catalog, per-slot inputs, demand splitting.
//! - [`cost`]: per-BS energy, M/G/1 sojourn time, delay cost, system totals.
//! - [`offload`]: offloading fractions for a fixed caching matrix.
//! - [`gibbs`]: decentralized Gibbs-sampling search over caching matrices.
//! - [`oreo`]: the online controller driven by a virtual energy-deficit queue.
//! - [`baselines`]: comparison schemes and the exhaustive oracle.
//! - [`harness`]: experiments, metrics, plot data and the M/G/1 simulator.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cost;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod model;
pub mod offload;
pub mod oreo;
pub mod scenario;
pub mod seed;

pub use error::{Error, Result};
