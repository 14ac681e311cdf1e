//! Multi-tasking quantum annealing emulation.
//!
//! Many small optimization problems are packed side by side onto one
//! annealer graph, each with its own chain strength and scaling, sampled
//! together and decoded independently. Physical hardware is replaced by a
//! seeded simulated-annealing sampler; small instances can be analyzed
//! exactly through the transverse-field Ising spectrum.
//!
//! Modules follow the pipeline order: [`graphs`] → [`qubo`] → [`topology`] →
//! [`embedding`] → [`parameterize`] → [`sampling`], with [`spectrum`] for the
//! exact analysis and [`harness`] orchestrating experiments and metrics.

pub mod error;
pub mod graphs;
pub mod harness;
pub mod qubo;
pub mod embedding;
pub mod parameterize;
pub mod sampling;
pub mod seed;
pub mod spectrum;
pub mod topology;

pub use error::{Error, Result};
