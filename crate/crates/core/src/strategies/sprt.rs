use serde::Serialize;

use crate::bag::{BagSession, SessionError, StrategyOutcome};
use crate::error::{Error, Result};

use super::{ceil_count, check_open_unit};

/// Number of arms used to estimate the light mean before the walk phase.
pub const CALIBRATION_ARMS: u64 = 5;

/// Parameters of the SPRT-like strategy, derived from a lower bound `alpha0`
/// on the heavy fraction and a lower bound `epsilon0` on the gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SprtConfig {
    delta: f64,
    alpha0: f64,
    epsilon0: f64,
    n: u64,
    m: u64,
    lower: f64,
    upper: f64,
    k1: u64,
    k2: u64,
}

impl SprtConfig {
    /// Accepts `delta` in (0, 1), `alpha0` in (0, 1/2], `epsilon0` in (0, 1].
    pub fn new(delta: f64, alpha0: f64, epsilon0: f64) -> Result<Self> {
        check_open_unit("delta", delta, 1.0)?;
        if !(alpha0 > 0.0 && alpha0 <= 0.5) {
            return Err(Error::invalid("alpha0", format!("must lie in (0, 1/2], got {alpha0}")));
        }
        if !(epsilon0 > 0.0 && epsilon0 <= 1.0) {
            return Err(Error::invalid("epsilon0", format!("must lie in (0, 1], got {epsilon0}")));
        }
        let n = ceil_count(2.0 * 9f64.ln() / alpha0);
        let log_term = (14.0 * n as f64 / delta).ln();
        let inv_eps2 = 1.0 / (epsilon0 * epsilon0);
        let m = ceil_count(64.0 * inv_eps2 * log_term);
        let lower = -8.0 / epsilon0 * 21f64.ln();
        let upper = 8.0 / epsilon0 * log_term;
        let k1 = CALIBRATION_ARMS;
        let floor = (delta / 8.0).min(inv_eps2 / m as f64);
        let k2 = ceil_count(8.0 * inv_eps2 * (2.0 * k1 as f64 / floor).ln());
        Ok(Self {
            delta,
            alpha0,
            epsilon0,
            n,
            m,
            lower,
            upper,
            k1,
            k2,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    /// Arms examined in the walk phase.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Per-arm sample cap in the walk phase.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Abandon boundary `A` (negative).
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// Declare boundary `B` (positive).
    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn k1(&self) -> u64 {
        self.k1
    }

    /// Samples per calibration arm.
    pub fn k2(&self) -> u64 {
        self.k2
    }

    /// Worst-case sample count `k1 k2 + n m`.
    pub fn sample_cap(&self) -> u64 {
        self.k1
            .saturating_mul(self.k2)
            .saturating_add(self.n.saturating_mul(self.m))
    }
}

/// One full pass of the strategy on a live session. Returns the terminal
/// outcome if an arm crossed the upper boundary, `None` if every arm was
/// abandoned (the session stays open).
pub(crate) fn sprt_pass(
    cfg: &SprtConfig,
    s: &mut BagSession,
) -> Result<Option<StrategyOutcome>, SessionError> {
    let mut light_estimate = f64::INFINITY;
    for _ in 0..cfg.k1 {
        s.draw_next()?;
        let mut sum = 0.0;
        for _ in 0..cfg.k2 {
            sum += s.sample_current()?;
        }
        light_estimate = light_estimate.min(sum / cfg.k2 as f64);
    }
    let centre = light_estimate + 0.5 * cfg.epsilon0;

    for _ in 0..cfg.n {
        s.draw_next()?;
        let mut walk = 0.0;
        for _ in 0..cfg.m {
            walk += s.sample_current()? - centre;
            if walk > cfg.upper {
                return s.declare_heavy().map(Some);
            }
            if walk < cfg.lower {
                break;
            }
        }
    }
    Ok(None)
}

/// Estimates the light mean from a few calibration arms, then runs a
/// two-boundary random walk on each of up to `n` fresh arms. Declares the
/// first arm whose walk exits upward, or nothing.
pub fn run_adaptive_sprt(cfg: &SprtConfig, session: &mut BagSession) -> Result<StrategyOutcome> {
    let r = sprt_pass(cfg, session).and_then(|hit| match hit {
        Some(out) => Ok(out),
        None => session.declare_null(),
    });
    Ok(session.finish(r)?)
}
