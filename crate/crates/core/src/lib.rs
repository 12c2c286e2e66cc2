//! Building and using math formula retrieval test collections.
//!
//! The pipeline runs from LaTeX to structure ([`formula`]), groups visually
//! identical formulas ([`cluster`]), builds judgment pools ([`pool`]),
//! aggregates relevance judgments ([`judgments`]), scores runs
//! ([`metrics`]) and compares system orderings ([`meta`]). [`retrieve`] is
//! a small structural baseline for producing runs end to end.

pub mod cluster;
pub mod collection;
mod error;
pub mod formula;
pub mod judgments;
pub mod meta;
pub mod metrics;
pub mod pool;
pub mod retrieve;

pub use error::{Error, Result};
