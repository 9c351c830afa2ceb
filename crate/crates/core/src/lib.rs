//! Continual-learning toolkit.
//!
//! Benchmarks turn datasets into train/test streams of experiences,
//! strategies train models on those streams through a callback plugin
//! system, and an evaluator routes metric values to loggers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autograd;
pub mod benchmarks;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod logging;
pub mod models;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
