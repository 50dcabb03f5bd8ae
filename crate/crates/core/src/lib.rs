//! Diffusion multi-rate LMS over sensor networks.
//!
//! The estimation engine ([`dmlms`]) identifies an unknown two-rate system
//! from node data with an adapt-then-combine diffusion recursion; the
//! filtered-x engine ([`anc`]) uses the same recursion to drive distributed
//! active noise control. [`harness`] wires both into reproducible,
//! trial-averaged experiments.

pub mod anc;
pub mod config;
pub mod dmlms;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod multirate;
pub mod plant;
pub mod seeding;
pub mod topology;

pub use error::{Error, Result};
