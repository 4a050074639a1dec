//! Joint service placement and request routing in multi-cell edge networks.
//!
//! The crate builds the placement/routing integer program, solves its linear
//! relaxation with an embedded simplex, rounds the fractional optimum with
//! randomized rounding, repairs the rounded solution into a feasible one, and
//! compares against a greedy caching baseline and exact oracles.

pub mod adaptation;
pub mod analysis;
pub mod baselines;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod model;
pub mod relaxation;
pub mod rounding;
pub mod stream;

pub use error::{Error, Result};
