//! Core algorithms for desk-scale federated learning with adaptive
//! differential privacy.
//!
//! Everything in this crate is a pure function over value-semantic data:
//! results depend only on the explicit seeds passed in, never on scheduling
//! or global state. The crate is `no_std` (with `alloc`) so the math core
//! stays free of IO; file formats, configuration, and the CLI live in the
//! companion `fedadp` crate.
//!
//! Module map:
//!
//! - [`nn`] — from-scratch MLP: forward, backprop, clipped SGD, local training
//! - [`data`] — datasets, IID partitioning, synthetic blob generator
//! - [`dp`] — Gaussian-mechanism calibration and seeded noise injection
//! - [`importance`] — sensitivity- and variance-based feature importance
//! - [`adaptive`] — importance-tiered noise plans
//! - [`federation`] — per-client update pipeline and weighted aggregation

#![no_std]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod adaptive;
pub mod data;
pub mod dp;
pub mod error;
pub mod federation;
pub mod importance;
pub mod matrix;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
