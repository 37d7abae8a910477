//! Heavy-arm identification strategies. Each one drives a [`BagSession`] to a
//! terminal [`StrategyOutcome`].
//!
//! [`BagSession`]: crate::bag::BagSession
//! [`StrategyOutcome`]: crate::bag::StrategyOutcome

mod fixed;
mod schedules;
mod sprt;

pub use crate::bag::{StageInfo, StrategyOutcome};
pub use fixed::{run_fixed_sample, FixedSampleConfig};
pub use schedules::{
    landmarks, run_doubling_alpha, run_doubling_epsilon, run_fully_adaptive, stage_delta,
};
pub use sprt::{run_adaptive_sprt, SprtConfig};

use crate::error::{Error, Result};

pub(crate) fn check_open_unit(name: &'static str, v: f64, hi: f64) -> Result<()> {
    if v > 0.0 && v < hi {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in (0, {hi}), got {v}")))
    }
}

pub(crate) fn ceil_count(x: f64) -> u64 {
    // saturates for absurd configurations; the session budget stops those runs
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil().max(1.0) as u64
    }
}
