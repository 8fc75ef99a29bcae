//! Bernoulli-factory toolkit for quantum randomness processing.
//!
//! A single superconducting-style qubit prepared in `sqrt(p)|0> + sqrt(1-p)|1>`
//! (a "quoin") yields different classical coins depending on the measurement
//! basis. Composing a handful of such coins produces an exact
//! `f(p) = 4p(1-p)`-coin, a function no classical procedure can build from
//! `p`-coins alone. This crate simulates the quoin measurements (ideal and
//! noisy), implements the coin-processing protocol and its classical
//! counterparts (truncated doubling, square-root and half coins), and provides
//! the estimators, tail bounds and consumption accounting needed to reproduce
//! the protocol's headline statistics at desk scale.

pub mod analysis;
pub mod coin;
pub mod config;
pub mod exact;
pub mod factory;
pub mod oracle;
pub mod quoin;
pub mod report;
pub mod runner;
pub mod verify;

pub use coin::{make_bernoulli, metered, BiasedSource, Bit, ConsumptionMeter};
// pub use config::ExperimentConfig;
pub use exact::ExactProb;
pub use factory::{FactoryError, FactoryPipeline};
pub use quoin::{Basis, NoiseModel, QuoinSpec};

/// Seed used by the verification suite and as the CLI default.
pub const DEFAULT_SEED: u64 = 0x5EED_C014;
