//! Temporal theory-of-mind reasoning over short stories and dialogues.
//!
//! A story is annotated with time points, parsed into an event log, and each
//! character's perceptible time set is derived from the log. Higher-order
//! belief questions are answered on the intersection of those sets.

pub mod error;
pub mod event;
pub mod generator;
pub mod oracle;
pub mod parser;
pub mod perception;
pub mod solver;

pub use error::{Error, Result};
