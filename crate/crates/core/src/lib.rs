//! Anytime progressive pruning over megabatch streams.
//!
//! The crate trains small classifiers on a sequence of megabatches, pruning a
//! global mask a step further at every megabatch (or once, up front, for the
//! one-shot baseline), and records per-epoch curves, per-megabatch test errors
//! and the cumulative error rate.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod models;
pub mod pruners;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
