//! Simulation and analysis toolkit for finding a heavy arm in an infinite bag
//! of two-type arms when arms can only be examined one at a time.
//!
//! * [`model`]: problem instances, arm families, seeded randomness.
//! * [`bag`]: the one-arm-at-a-time sampling environment.
//! * [`strategies`]: fixed-sample, SPRT-like and parameter-free strategies.
//! * [`divergence`]: KL and chi-squared divergences, mixture chi-squared.
//! * [`bounds`]: lower and upper sample-complexity bounds.
//! * [`detect`]: threshold test for a Gaussian mixture.
//! * [`harness`]: Monte Carlo batches, sweeps, CSV output.

pub mod bag;
pub mod bounds;
pub mod detect;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod model;
pub mod strategies;

pub use bag::{BagSession, SessionOptions, StrategyOutcome};
pub use error::{Error, Result};
pub use model::{ArmFamily, Label, MixtureSpec, RandomSource};
