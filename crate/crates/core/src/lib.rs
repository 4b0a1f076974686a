//! Label differential privacy: training mechanisms, label inference attacks,
//! the expected-attack-utility and advantage metrics, closed-form advantage
//! bounds, and the experiment harnesses that tie them together.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod mechanisms;
pub mod metrics;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
