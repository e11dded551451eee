//! Benchmark harness for inexact machine unlearning.
//!
//! The crate builds deletion tests (random selection, class removal, random
//! confusion, interclass confusion), trains small dense networks, applies
//! unlearning procedures (full retrain, EU-k, CF-k) and scores them with
//! error, forgetting score and confidence-based membership inference, on
//! both the deletion set (memorization) and unseen samples like it
//! (property generalization). It also computes the closed-form cost curves
//! of isolation-based unlearning.

pub mod data;
pub mod error;
pub mod harness;
pub mod isolation;
pub mod metrics;
pub mod nn;
pub mod seed;
pub mod unlearn;

pub use error::{Error, Result};
