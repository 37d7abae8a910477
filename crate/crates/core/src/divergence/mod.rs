//! KL and chi-squared divergences between arm distributions, the chi-squared
//! distance from a two-point mixture to a single member, and the constants of
//! the exponential-family mixture bound.

mod expfamily;
mod quadrature;

use std::fmt;

use serde::{Serialize, Serializer};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::model::{ArmFamily, MixtureSpec};

pub use expfamily::{
    mixture_bound_constants, mixture_chi2_bound, variance_extremes, ExpFamilyDescriptor,
    MixtureBoundConstants,
};

/// A divergence that may be infinite (e.g. disjoint supports).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DivergenceValue {
    Finite(f64),
    Infinite,
}

impl DivergenceValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            DivergenceValue::Finite(v) => Some(v),
            DivergenceValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, DivergenceValue::Infinite)
    }

    /// The value as a float, with `f64::INFINITY` for the infinite case.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            DivergenceValue::Finite(v.max(0.0))
        } else {
            DivergenceValue::Infinite
        }
    }
}

impl fmt::Display for DivergenceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceValue::Finite(v) => write!(f, "{v}"),
            DivergenceValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for DivergenceValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DivergenceValue::Finite(v) => s.serialize_f64(*v),
            DivergenceValue::Infinite => s.serialize_str("inf"),
        }
    }
}

fn check_pair(family: ArmFamily, p: f64, q: f64) -> Result<()> {
    family.validate()?;
    family.validate_theta("theta_p", p)?;
    family.validate_theta("theta_q", q)
}

fn beta_shapes(concentration: f64, theta: f64) -> (f64, f64) {
    (concentration * theta, concentration * (1.0 - theta))
}

// p ln(p/q) with 0 ln 0 = 0; None when p > 0 = q.
fn xlogx_ratio(p: f64, q: f64) -> Option<f64> {
    if p == 0.0 {
        Some(0.0)
    } else if q == 0.0 {
        None
    } else {
        Some(p * (p / q).ln())
    }
}

/// `KL(P | Q) = E_P[ln dP/dQ]` for two members of `family`.
pub fn kl(family: ArmFamily, theta_p: f64, theta_q: f64) -> Result<DivergenceValue> {
    check_pair(family, theta_p, theta_q)?;
    if theta_p == theta_q {
        return Ok(DivergenceValue::Finite(0.0));
    }
    Ok(match family {
        ArmFamily::Bernoulli => {
            match (
                xlogx_ratio(theta_p, theta_q),
                xlogx_ratio(1.0 - theta_p, 1.0 - theta_q),
            ) {
                (Some(a), Some(b)) => DivergenceValue::from_f64(a + b),
                _ => DivergenceValue::Infinite,
            }
        }
        ArmFamily::Gaussian { sigma } => {
            DivergenceValue::Finite((theta_p - theta_q).powi(2) / (2.0 * sigma * sigma))
        }
        ArmFamily::BoundedBeta { concentration } => {
            let (ap, bp) = beta_shapes(concentration, theta_p);
            let (aq, bq) = beta_shapes(concentration, theta_q);
            // ap + bp = aq + bq, so the digamma(ap + bp) term cancels.
            let v = ln_beta(aq, bq) - ln_beta(ap, bp)
                + (ap - aq) * digamma(ap)
                + (bp - bq) * digamma(bp);
            DivergenceValue::from_f64(v)
        }
    })
}

/// `chi2(P | Q) = E_Q[(dP/dQ - 1)^2]` for two members of `family`.
pub fn chi2(family: ArmFamily, theta_p: f64, theta_q: f64) -> Result<DivergenceValue> {
    check_pair(family, theta_p, theta_q)?;
    if theta_p == theta_q {
        return Ok(DivergenceValue::Finite(0.0));
    }
    Ok(match family {
        ArmFamily::Bernoulli => {
            let var = theta_q * (1.0 - theta_q);
            if var == 0.0 {
                DivergenceValue::Infinite
            } else {
                DivergenceValue::from_f64((theta_p - theta_q).powi(2) / var)
            }
        }
        ArmFamily::Gaussian { sigma } => {
            DivergenceValue::from_f64(((theta_p - theta_q) / sigma).powi(2).exp_m1())
        }
        ArmFamily::BoundedBeta { concentration } => {
            // E_Q[(p/q)^2] = B(2ap - aq, 2bp - bq) B(aq, bq) / B(ap, bp)^2,
            // finite only while both shapes stay positive.
            let (ap, bp) = beta_shapes(concentration, theta_p);
            let (aq, bq) = beta_shapes(concentration, theta_q);
            let (a2, b2) = (2.0 * ap - aq, 2.0 * bp - bq);
            if a2 <= 0.0 || b2 <= 0.0 {
                DivergenceValue::Infinite
            } else {
                let log_second_moment = ln_beta(a2, b2) + ln_beta(aq, bq) - 2.0 * ln_beta(ap, bp);
                DivergenceValue::from_f64(log_second_moment.exp_m1())
            }
        }
    })
}

/// Chi-squared divergence between the `m`-fold products of `P` and `Q`:
/// `(1 + chi2(P | Q))^m - 1`.
pub fn chi2_product(
    family: ArmFamily,
    theta_p: f64,
    theta_q: f64,
    m: u32,
) -> Result<DivergenceValue> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    Ok(match chi2(family, theta_p, theta_q)? {
        DivergenceValue::Finite(x) => DivergenceValue::from_f64((m as f64 * x.ln_1p()).exp_m1()),
        DivergenceValue::Infinite => DivergenceValue::Infinite,
    })
}

/// `chi2((1 - alpha) f0 + alpha f1 | f_ref)` where each `f` is the law of `m`
/// iid observations from the arm.
///
/// Bernoulli arms reduce to a finite sum over the Binomial(m) support; Gaussian
/// arms reduce to the law of the sample mean and are integrated numerically.
pub fn chi2_mixture_vs_single(
    spec: &MixtureSpec,
    m: u32,
    reference_theta: f64,
) -> Result<DivergenceValue> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let family = spec.family();
    family.validate_theta("reference_theta", reference_theta)?;
    match family {
        ArmFamily::Bernoulli => Ok(binomial_mixture_chi2(spec, m, reference_theta)),
        ArmFamily::Gaussian { sigma } => {
            gaussian_mixture_chi2(spec, sigma / (m as f64).sqrt(), reference_theta)
                .map(DivergenceValue::from_f64)
        }
        ArmFamily::BoundedBeta { .. } => Err(Error::UnsupportedFamily(family.name())),
    }
}

pub(crate) fn binomial_pmf(m: u32, k: u32, p: f64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == m { 1.0 } else { 0.0 };
    }
    let (k, mf) = (k as f64, m as f64);
    let ln_choose = -((mf + 1.0).ln()) - ln_beta(mf - k + 1.0, k + 1.0);
    (ln_choose + k * p.ln() + (mf - k) * (-p).ln_1p()).exp()
}

fn binomial_mixture_chi2(spec: &MixtureSpec, m: u32, r: f64) -> DivergenceValue {
    if r == 0.0 || r == 1.0 {
        return degenerate_reference_chi2(spec, m, r);
    }
    let a = spec.alpha();
    let mf = m as f64;
    // log likelihood ratio of k successes under mean t against mean r
    let llr = |t: f64, k: f64| {
        let up = if k > 0.0 { k * (t / r).ln() } else { 0.0 };
        let down = if k < mf { (mf - k) * ((1.0 - t) / (1.0 - r)).ln() } else { 0.0 };
        up + down
    };
    let mut total = 0.0;
    for k in 0..=m {
        let kf = k as f64;
        let (l0, l1) = (llr(spec.theta0(), kf), llr(spec.theta1(), kf));
        // ln |P/Q - 1|, staying in log space where the ratio overflows
        let ln_excess = if l0.max(l1) < 700.0 {
            let d = (1.0 - a) * l0.exp_m1() + a * l1.exp_m1();
            if d == 0.0 {
                continue;
            }
            d.abs().ln()
        } else {
            let (x, y) = ((-a).ln_1p() + l0, a.ln() + l1);
            let hi = x.max(y);
            hi + ((x - hi).exp() + (y - hi).exp()).ln()
        };
        let ln_q = -((mf + 1.0).ln()) - ln_beta(mf - kf + 1.0, kf + 1.0)
            + kf * r.ln()
            + (mf - kf) * (-r).ln_1p();
        total += (ln_q + 2.0 * ln_excess).exp();
    }
    DivergenceValue::from_f64(total)
}

// reference law is a point mass
fn degenerate_reference_chi2(spec: &MixtureSpec, m: u32, r: f64) -> DivergenceValue {
    let a = spec.alpha();
    let mut total = 0.0;
    for k in 0..=m {
        let q = binomial_pmf(m, k, r);
        let diff = (1.0 - a) * (binomial_pmf(m, k, spec.theta0()) - q)
            + a * (binomial_pmf(m, k, spec.theta1()) - q);
        if diff == 0.0 {
            continue;
        }
        if q == 0.0 {
            return DivergenceValue::Infinite;
        }
        total += diff * diff / q;
    }
    DivergenceValue::from_f64(total)
}

fn gaussian_mixture_chi2(spec: &MixtureSpec, sigma: f64, r: f64) -> Result<f64> {
    let a = spec.alpha();
    let (t0, t1) = (spec.theta0(), spec.theta1());
    let s2 = sigma * sigma;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    // log(f_mu / f_r)(x) = (mu - r)(2x - mu - r) / (2 s2)
    let log_ratio = move |mu: f64, x: f64| (mu - r) * (2.0 * x - mu - r) / (2.0 * s2);
    let integrand = |x: f64| {
        let q = norm * (-(x - r).powi(2) / (2.0 * s2)).exp();
        if q == 0.0 {
            return 0.0;
        }
        let excess = (1.0 - a) * log_ratio(t0, x).exp_m1() + a * log_ratio(t1, x).exp_m1();
        q * excess * excess
    };
    // Every cross term is a Gaussian bump centred in the hull of these points.
    let centres = [r, 2.0 * t0 - r, 2.0 * t1 - r];
    let lo = centres.iter().copied().fold(f64::INFINITY, f64::min) - 12.0 * sigma;
    let hi = centres.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 12.0 * sigma;
    let panels = (((hi - lo) / sigma).ceil() as usize).clamp(8, 512);
    quadrature::integrate(integrand, lo, hi, panels, 1e-11, 1e-300)
}
