//! Concentration and anti-concentration of fractional l^p quasi-norms.
//!
//! The crate computes Chernoff rate functions for `|x|^p` of i.i.d. coordinates,
//! exact and bounded probabilities for laws with an atom at zero, seeded Monte
//! Carlo frequencies, synthetic embedding experiments and tabular-data
//! diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anti_concentration;
pub mod closed_forms;
pub mod diagnostics;
pub mod distributions;
pub mod embedding_lab;
pub mod error;
pub mod matrix;
pub mod monte_carlo;
pub mod norms;
pub mod optimize;
pub mod quadrature;
pub mod rate_engine;
pub mod rng;
pub mod special;

pub use distributions::{DistributionSpec, Sign};
pub use error::{Error, Result};
