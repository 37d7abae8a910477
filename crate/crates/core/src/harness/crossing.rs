//! Monte Carlo probe of the probability that a centred random walk ever
//! crosses the line `slope * n + offset`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RandomSource;

use super::stats::{wilson_radius, Z_95};

/// Step distribution of the walk; all are zero-mean with range at most 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkIncrement {
    /// `+1/2` or `-1/2` with equal probability.
    Rademacher,
    /// Always 0.
    Zero,
    /// Uniform on `[-1/2, 1/2)`.
    UniformCentered,
}

impl WalkIncrement {
    #[inline]
    fn step(self, rng: &mut RandomSource) -> f64 {
        match self {
            WalkIncrement::Rademacher => {
                if rng.uniform() < 0.5 {
                    0.5
                } else {
                    -0.5
                }
            }
            WalkIncrement::Zero => 0.0,
            WalkIncrement::UniformCentered => rng.uniform() - 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossingEstimate {
    pub slope: f64,
    pub offset: f64,
    pub horizon: u64,
    pub trials: u64,
    pub crossings: u64,
    pub probability: f64,
    /// Wilson 95% radius.
    pub ci_radius: f64,
    /// Reference bound `7 exp(-slope * offset / 2)`.
    pub bound: f64,
}

/// Smallest horizon accepted for a given line: `ceil(8 offset / slope)`.
pub fn min_horizon(slope: f64, offset: f64) -> u64 {
    (8.0 * offset / slope).ceil() as u64
}

/// Estimates `P(exists n <= horizon: S_n >= slope * n + offset)` from `trials`
/// independent walks; walk `i` uses stream `i` of `seed`.
///
/// Requires `slope * offset >= 1` and `horizon >= 8 offset / slope`
/// (`None` picks the minimum).
pub fn probe_linear_crossing(
    slope: f64,
    offset: f64,
    walk: WalkIncrement,
    horizon: Option<u64>,
    trials: u64,
    seed: u64,
) -> Result<CrossingEstimate> {
    if !(slope > 0.0 && offset > 0.0 && slope.is_finite() && offset.is_finite()) {
        return Err(Error::invalid("slope", "slope and offset must be positive and finite"));
    }
    if slope * offset < 1.0 {
        return Err(Error::Precondition(format!(
            "slope * offset >= 1 fails: {slope} * {offset} = {}",
            slope * offset
        )));
    }
    let floor = min_horizon(slope, offset);
    let horizon = horizon.unwrap_or(floor);
    if horizon < floor {
        return Err(Error::Precondition(format!(
            "horizon >= 8 offset / slope fails: {horizon} < {floor}"
        )));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let crosses = |i: u64| {
        let mut rng = RandomSource::new(seed, i);
        let mut s = 0.0;
        for n in 1..=horizon {
            s += walk.step(&mut rng);
            if s >= slope * n as f64 + offset {
                return true;
            }
        }
        false
    };
    let crossings = count(trials, crosses);
    Ok(CrossingEstimate {
        slope,
        offset,
        horizon,
        trials,
        crossings,
        probability: crossings as f64 / trials as f64,
        ci_radius: wilson_radius(crossings, trials, Z_95),
        bound: 7.0 * (-slope * offset / 2.0).exp(),
    })
}

#[cfg(feature = "parallel")]
fn count<F: Fn(u64) -> bool + Sync + Send>(trials: u64, f: F) -> u64 {
    use rayon::prelude::*;
    (0..trials).into_par_iter().filter(|&i| f(i)).count() as u64
}

#[cfg(not(feature = "parallel"))]
fn count<F: Fn(u64) -> bool>(trials: u64, f: F) -> u64 {
    (0..trials).filter(|&i| f(i)).count() as u64
}
