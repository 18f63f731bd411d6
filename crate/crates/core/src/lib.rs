//! Empirical privacy auditing of DP-SGD in the final-model setting.
//!
//! Paired ensembles are trained with full-batch DP-SGD on neighbouring
//! datasets `D` and `D ∪ {canary}`. An audit sample (the canary itself, or
//! an input crafted by gradient descent on its pixels to separate the two
//! ensembles' loss distributions) is scored on held-out models, and the
//! resulting error rates are turned into a high-confidence lower bound on
//! `ε` through Clopper-Pearson bounds and `μ`-GDP.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod auditor;
pub mod crafting;
pub mod dpsgd;
pub mod error;
pub mod harness;
pub mod nn;
mod par;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
