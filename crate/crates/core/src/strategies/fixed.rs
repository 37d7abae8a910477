use serde::Serialize;

use crate::bag::{BagSession, SessionError, StrategyOutcome};
use crate::error::{Error, Result};

use super::{ceil_count, check_open_unit};

/// Parameters of the fixed-sample-size strategy: flip each arm `m` times and
/// look at no more than `n_hat` arms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedSampleConfig {
    alpha: f64,
    theta0: f64,
    theta1: f64,
    delta: f64,
    n_hat: u64,
    m: u64,
}

impl FixedSampleConfig {
    /// `n_hat = ceil(ln(2/delta)/alpha)`, `m = ceil(2 ln(4 n_hat/delta)/(theta1 - theta0)^2)`.
    pub fn new(alpha: f64, theta0: f64, theta1: f64, delta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1/2], got {alpha}")));
        }
        check_open_unit("delta", delta, 0.25)?;
        if !(theta0.is_finite() && theta1.is_finite() && theta0 < theta1) {
            return Err(Error::invalid(
                "theta1",
                format!("must exceed theta0 ({theta0}), got {theta1}"),
            ));
        }
        let n_hat = ceil_count((2.0 / delta).ln() / alpha);
        let eps = theta1 - theta0;
        let m = ceil_count(2.0 * (4.0 * n_hat as f64 / delta).ln() / (eps * eps));
        Ok(Self {
            alpha,
            theta0,
            theta1,
            delta,
            n_hat,
            m,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_hat(&self) -> u64 {
        self.n_hat
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Declaration threshold on the empirical mean, `(theta0 + theta1)/2`.
    pub fn threshold(&self) -> f64 {
        0.5 * (self.theta0 + self.theta1)
    }
}

fn fixed_inner(cfg: &FixedSampleConfig, s: &mut BagSession) -> Result<StrategyOutcome, SessionError> {
    let threshold = cfg.threshold();
    for i in 1..=cfg.n_hat {
        s.draw_next()?;
        let mut sum = 0.0;
        for _ in 0..cfg.m {
            sum += s.sample_current()?;
        }
        if sum / cfg.m as f64 >= threshold || i == cfg.n_hat {
            return s.declare_heavy();
        }
    }
    unreachable!("n_hat >= 1")
}

/// Samples each arm `m` times and declares the first one whose empirical mean
/// reaches the midpoint; if none does within `n_hat` arms, declares the last.
pub fn run_fixed_sample(cfg: &FixedSampleConfig, session: &mut BagSession) -> Result<StrategyOutcome> {
    let r = fixed_inner(cfg, session);
    Ok(session.finish(r)?)
}
