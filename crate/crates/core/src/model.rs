//! Problem instances, arm families, and the seeded randomness shared by every
//! simulation in the crate.
//!
//! A [`MixtureSpec`] describes a bag of arms: each drawn arm is heavy (mean
//! `theta1`) with probability `alpha` and light (mean `theta0`) otherwise.
//! All randomness flows through [`RandomSource`], a ChaCha8 stream addressed
//! by `(seed, stream_id)` so that trial `i` of a batch always replays the same
//! sample path no matter which thread runs it.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-parameter family of arm distributions, indexed by the mean `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmFamily {
    Bernoulli,
    /// Normal with mean `theta` and known standard deviation.
    Gaussian { sigma: f64 },
    /// Beta with shapes `(c * theta, c * (1 - theta))`, so samples lie in
    /// `[0, 1]` with mean `theta`.
    BoundedBeta { concentration: f64 },
}

impl ArmFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArmFamily::Bernoulli => Ok(()),
            ArmFamily::Gaussian { sigma } => {
                if sigma.is_finite() && sigma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("sigma", format!("must be positive, got {sigma}")))
                }
            }
            ArmFamily::BoundedBeta { concentration } => {
                if concentration.is_finite() && concentration > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "concentration",
                        format!("must be positive, got {concentration}"),
                    ))
                }
            }
        }
    }

    /// Checks that `theta` indexes a member of this family.
    ///
    /// Bernoulli accepts the closed interval (point masses are legal arms),
    /// the Beta family needs both shape parameters positive.
    pub fn validate_theta(&self, name: &'static str, theta: f64) -> Result<()> {
        let ok = match self {
            ArmFamily::Bernoulli => (0.0..=1.0).contains(&theta),
            ArmFamily::Gaussian { .. } => theta.is_finite(),
            ArmFamily::BoundedBeta { .. } => theta > 0.0 && theta < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                name,
                format!("{theta} is not a valid mean for the {} family", self.name()),
            ))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ArmFamily::Bernoulli => "bernoulli",
            ArmFamily::Gaussian { .. } => "gaussian",
            ArmFamily::BoundedBeta { .. } => "beta",
        }
    }

    /// Compact label used in CSV output, e.g. `gaussian:1.5`.
    pub fn label(&self) -> String {
        match *self {
            ArmFamily::Bernoulli => "bernoulli".to_string(),
            ArmFamily::Gaussian { sigma } => format!("gaussian:{sigma}"),
            ArmFamily::BoundedBeta { concentration } => format!("beta:{concentration}"),
        }
    }
}

impl fmt::Display for ArmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Hidden type of an arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Heavy,
    Light,
}

/// A most-biased-coin problem instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixtureSpec")]
pub struct MixtureSpec {
    alpha: f64,
    theta0: f64,
    theta1: f64,
    family: ArmFamily,
}

#[derive(Deserialize)]
struct RawMixtureSpec {
    alpha: f64,
    theta0: f64,
    theta1: f64,
    family: ArmFamily,
}

impl TryFrom<RawMixtureSpec> for MixtureSpec {
    type Error = Error;

    fn try_from(raw: RawMixtureSpec) -> Result<Self> {
        MixtureSpec::new(raw.alpha, raw.theta0, raw.theta1, raw.family)
    }
}

impl MixtureSpec {
    /// Validated constructor: `alpha` in `[0, 1/2]`, `theta0 < theta1`, both
    /// means valid for `family`.
    pub fn new(alpha: f64, theta0: f64, theta1: f64, family: ArmFamily) -> Result<Self> {
        if !(0.0..=0.5).contains(&alpha) {
            return Err(Error::invalid("alpha", format!("must lie in [0, 1/2], got {alpha}")));
        }
        Self::build(alpha, theta0, theta1, family)
    }

    /// Same instance with a mixing weight anywhere in `[0, 1]`.
    ///
    /// Only meant for degenerate test configurations such as an all-heavy bag;
    /// the bounds and guarantees in this crate assume `alpha <= 1/2`.
    pub fn with_alpha_override(self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { alpha, ..self })
    }

    fn build(alpha: f64, theta0: f64, theta1: f64, family: ArmFamily) -> Result<Self> {
        family.validate()?;
        family.validate_theta("theta0", theta0)?;
        family.validate_theta("theta1", theta1)?;
        if theta0 >= theta1 {
            return Err(Error::invalid(
                "theta1",
                format!("must exceed theta0 ({theta0}), got {theta1}"),
            ));
        }
        Ok(Self {
            alpha,
            theta0,
            theta1,
            family,
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

    pub fn family(&self) -> ArmFamily {
        self.family
    }

    /// Gap `theta1 - theta0`.
    pub fn gap(&self) -> f64 {
        self.theta1 - self.theta0
    }

    pub fn theta_of(&self, label: Label) -> f64 {
        match label {
            Label::Heavy => self.theta1,
            Label::Light => self.theta0,
        }
    }
}

/// Seeded, stream-addressable random number generator.
///
/// Two sources with equal `(seed, stream_id)` produce identical output on every
/// platform; different `stream_id`s select disjoint ChaCha8 streams.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Draws the hidden label of a fresh arm: heavy with probability `alpha`.
pub fn draw_label(spec: &MixtureSpec, rng: &mut RandomSource) -> Label {
    if rng.uniform() < spec.alpha {
        Label::Heavy
    } else {
        Label::Light
    }
}

/// One observation from the arm with mean `theta`.
pub fn sample_arm(family: ArmFamily, theta: f64, rng: &mut RandomSource) -> Result<f64> {
    Ok(ArmSampler::new(family, theta)?.sample(rng))
}

/// Pre-validated sampler for a single arm distribution.
#[derive(Clone, Copy, Debug)]
pub(crate) enum ArmSampler {
    Bernoulli(f64),
    Gaussian(Normal<f64>),
    Beta(Beta<f64>),
}

impl ArmSampler {
    pub(crate) fn new(family: ArmFamily, theta: f64) -> Result<Self> {
        family.validate()?;
        family.validate_theta("theta", theta)?;
        Ok(match family {
            ArmFamily::Bernoulli => ArmSampler::Bernoulli(theta),
            ArmFamily::Gaussian { sigma } => ArmSampler::Gaussian(
                Normal::new(theta, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?,
            ),
            ArmFamily::BoundedBeta { concentration } => ArmSampler::Beta(
                Beta::new(concentration * theta, concentration * (1.0 - theta))
                    .map_err(|e| Error::invalid("concentration", e.to_string()))?,
            ),
        })
    }

    #[inline]
    pub(crate) fn sample(&self, rng: &mut RandomSource) -> f64 {
        match self {
            ArmSampler::Bernoulli(p) => {
                if rng.uniform() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            ArmSampler::Gaussian(n) => n.sample(rng),
            ArmSampler::Beta(b) => b.sample(rng),
        }
    }
}

/// Upper tail of the standard normal, `Q(x) = P(Z > x)`.
pub fn gaussian_tail_q(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}
