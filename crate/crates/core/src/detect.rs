//! Threshold test for a Gaussian mixture: decide whether iid samples come from
//! `N(theta0, sigma^2)` or from `(1 - alpha) N(theta0, sigma^2) + alpha N(theta1, sigma^2)`
//! by counting how many exceed `theta1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{wilson_radius, Z_95};
use crate::model::{gaussian_tail_q, ArmFamily, ArmSampler, RandomSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Decision {
    /// Pure `theta0` population.
    H0,
    /// Mixture.
    H1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianTestPlan {
    pub theta0: f64,
    pub theta1: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Threshold on the exceedance fraction.
    pub gamma: f64,
    /// Difference of exceedance probabilities between the hypotheses.
    pub epsilon_gap: f64,
    pub n: u64,
    /// Hoeffding bound on each error probability at this `n`.
    pub error_bound: f64,
}

impl GaussianTestPlan {
    /// `P(X > theta1)` under the pure population.
    pub fn exceed_prob_h0(&self) -> f64 {
        gaussian_tail_q((self.theta1 - self.theta0) / self.sigma)
    }

    /// `P(X > theta1)` under the mixture.
    pub fn exceed_prob_h1(&self) -> f64 {
        (1.0 - self.alpha) * self.exceed_prob_h0() + 0.5 * self.alpha
    }

    /// Error bound `exp(-n alpha^2 min{Delta^2/(64 pi), 1/32})` at an arbitrary `n`.
    pub fn error_bound_at(&self, n: u64) -> f64 {
        (-(n as f64) * rate(self.theta0, self.theta1, self.sigma, self.alpha)).exp()
    }
}

fn rate(theta0: f64, theta1: f64, sigma: f64, alpha: f64) -> f64 {
    let d2 = ((theta1 - theta0) / sigma).powi(2);
    alpha * alpha * (d2 / (64.0 * std::f64::consts::PI)).min(1.0 / 32.0)
}

/// Smallest `n` whose error bound is at most `delta`, together with the test
/// threshold.
pub fn plan_gaussian_test(
    theta0: f64,
    theta1: f64,
    sigma: f64,
    alpha: f64,
    delta: f64,
) -> Result<GaussianTestPlan> {
    if !(theta0.is_finite() && theta1.is_finite() && theta1 > theta0) {
        return Err(Error::invalid("theta1", format!("must exceed theta0 ({theta0}), got {theta1}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1/2], got {alpha}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let r = rate(theta0, theta1, sigma, alpha);
    let mut n = ((1.0 / delta).ln() / r).ceil().max(1.0) as u64;
    // guard the ceiling against rounding in either direction
    while n > 1 && (-((n - 1) as f64) * r).exp() <= delta {
        n -= 1;
    }
    while (-(n as f64) * r).exp() > delta {
        n += 1;
    }
    let p0 = gaussian_tail_q((theta1 - theta0) / sigma);
    let p1 = (1.0 - alpha) * p0 + 0.5 * alpha;
    Ok(GaussianTestPlan {
        theta0,
        theta1,
        sigma,
        alpha,
        delta,
        gamma: 0.5 * (p0 + p1),
        epsilon_gap: alpha * (0.5 - p0),
        n,
        error_bound: (-(n as f64) * r).exp(),
    })
}

/// Decides H1 iff the fraction of samples above `theta1` strictly exceeds `gamma`.
pub fn run_gaussian_test(plan: &GaussianTestPlan, samples: &[f64]) -> Result<Decision> {
    if samples.len() as u64 != plan.n {
        return Err(Error::SampleCount {
            expected: plan.n as usize,
            got: samples.len(),
        });
    }
    let above = samples.iter().filter(|&&x| x > plan.theta1).count();
    Ok(decide(plan, above as u64))
}

pub(crate) fn decide(plan: &GaussianTestPlan, above: u64) -> Decision {
    if above as f64 / plan.n as f64 > plan.gamma {
        Decision::H1
    } else {
        Decision::H0
    }
}

/// Monte Carlo error rates of the test under each hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionRates {
    pub trials: u64,
    /// Runs on pure `theta0` data that decided H1.
    pub false_alarms: u64,
    /// Runs on mixture data that decided H0.
    pub misses: u64,
    pub false_alarm_rate: f64,
    pub miss_rate: f64,
    pub ci_false_alarm: f64,
    pub ci_miss: f64,
}

/// Runs the planned test `trials` times on each hypothesis. Trial `i` draws
/// its null data from stream `2i` and its mixture data from stream `2i + 1`.
pub fn simulate_detection(plan: &GaussianTestPlan, trials: u64, seed: u64) -> Result<DetectionRates> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let family = ArmFamily::Gaussian { sigma: plan.sigma };
    let light = ArmSampler::new(family, plan.theta0)?;
    let heavy = ArmSampler::new(family, plan.theta1)?;
    let run = |stream: u64, mixed: bool| {
        let mut rng = RandomSource::new(seed, stream);
        let mut above = 0u64;
        for _ in 0..plan.n {
            let x = if mixed && rng.uniform() < plan.alpha {
                heavy.sample(&mut rng)
            } else {
                light.sample(&mut rng)
            };
            above += (x > plan.theta1) as u64;
        }
        decide(plan, above)
    };
    let errors = |i: u64| {
        (
            (run(2 * i, false) == Decision::H1) as u64,
            (run(2 * i + 1, true) == Decision::H0) as u64,
        )
    };
    let add = |a: (u64, u64), b: (u64, u64)| (a.0 + b.0, a.1 + b.1);
    #[cfg(feature = "parallel")]
    let (false_alarms, misses) = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(errors).reduce(|| (0, 0), add)
    };
    #[cfg(not(feature = "parallel"))]
    let (false_alarms, misses) = (0..trials).map(errors).fold((0, 0), add);
    Ok(DetectionRates {
        trials,
        false_alarms,
        misses,
        false_alarm_rate: false_alarms as f64 / trials as f64,
        miss_rate: misses as f64 / trials as f64,
        ci_false_alarm: wilson_radius(false_alarms, trials, Z_95),
        ci_miss: wilson_radius(misses, trials, Z_95),
    })
}
