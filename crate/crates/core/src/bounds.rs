//! Closed-form sample-complexity bounds.
//!
//! Every unnamed absolute constant is set to 1 and the report is flagged with
//! `constant_known = false`; such values are only meaningful up to scale.

use serde::{Serialize, Serializer};

use crate::divergence::{self, chi2_product, kl, DivergenceValue};
use crate::error::{Error, Result};
use crate::model::{ArmFamily, MixtureSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    LowerBound,
    UpperBound,
}

/// Rows of the upper-bound summary table, one per knowledge regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeRegime {
    /// Fixed-sample strategy, everything known.
    FixedKnown,
    /// Adaptive SPRT with everything known.
    AdaptiveKnown,
    /// Gap unknown.
    UnknownThetas,
    /// Heavy fraction unknown.
    UnknownAlpha,
    /// Nothing known.
    UnknownAll,
}

impl KnowledgeRegime {
    pub const ALL: [KnowledgeRegime; 5] = [
        KnowledgeRegime::FixedKnown,
        KnowledgeRegime::AdaptiveKnown,
        KnowledgeRegime::UnknownThetas,
        KnowledgeRegime::UnknownAlpha,
        KnowledgeRegime::UnknownAll,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    AdaptiveLower,
    FixedKnownLower,
    FixedUnknownLower,
    Upper(KnowledgeRegime),
    FixedSampleExplicit,
    FullyAdaptiveDetailed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundInputs {
    pub alpha: f64,
    pub delta: f64,
    pub theta0: f64,
    pub theta1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<ArmFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(serialize_with = "extended_real")]
    pub value: f64,
    pub kind: BoundKind,
    pub constant_known: bool,
    pub formula: FormulaId,
    pub inputs: BoundInputs,
    /// Arguments of the `max` for bounds of that shape.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn extended_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("must lie in (0, 1], got {delta}")))
    }
}

fn check_gap(theta0: f64, theta1: f64) -> Result<f64> {
    if theta0.is_finite() && theta1.is_finite() && theta0 < theta1 {
        Ok(theta1 - theta0)
    } else {
        Err(Error::invalid("theta1", format!("must exceed theta0 ({theta0}), got {theta1}")))
    }
}

// log factor that never goes negative
fn pos_ln(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

fn inputs(alpha: f64, delta: f64, theta0: f64, theta1: f64) -> BoundInputs {
    BoundInputs {
        alpha,
        delta,
        theta0,
        theta1,
        family: None,
        m: None,
    }
}

/// Lower bound on `E[T]` for any adaptive procedure:
/// `max{(1 - delta)/alpha, (1 - delta)/(alpha KL(g0 | g1))}`.
pub fn lb_adaptive_known(
    alpha: f64,
    delta: f64,
    family: ArmFamily,
    theta0: f64,
    theta1: f64,
) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_delta(delta)?;
    check_gap(theta0, theta1)?;
    let first = (1.0 - delta) / alpha;
    let mut branches = vec![first];
    if let DivergenceValue::Finite(d) = kl(family, theta0, theta1)? {
        branches.push((1.0 - delta) / (alpha * d));
    }
    let value = branches.iter().copied().fold(0.0, f64::max);
    let note = (alpha > delta).then(|| {
        "validity unknown: the bound is only established for alpha below a constant times delta"
            .to_string()
    });
    Ok(BoundReport {
        value,
        kind: BoundKind::LowerBound,
        constant_known: false,
        formula: FormulaId::AdaptiveLower,
        inputs: BoundInputs {
            family: Some(family),
            ..inputs(alpha, delta, theta0, theta1)
        },
        branches,
        theta_star: None,
        note,
    })
}

/// Lower bound on `E[N_m]`, the number of arms examined by any procedure that
/// flips each arm exactly `m` times, when all parameters are known.
///
/// For Bernoulli arms the chi-squared term is relaxed to
/// `exp(m (theta1 - theta0)^2 / (theta0 (1 - theta0))) - 1`; other families use
/// the exact product divergence.
pub fn lb_fixed_known(
    alpha: f64,
    delta: f64,
    family: ArmFamily,
    theta0: f64,
    theta1: f64,
    m: u32,
) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_delta(delta)?;
    let gap = check_gap(theta0, theta1)?;
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let chi = match family {
        ArmFamily::Bernoulli => {
            let v = theta0 * (1.0 - theta0);
            if v == 0.0 {
                f64::INFINITY
            } else {
                (m as f64 * gap * gap / v).exp_m1()
            }
        }
        _ => chi2_product(family, theta1, theta0, m)?.as_f64(),
    };
    let first = (1.0 - delta) / alpha;
    let second = (1.0 / delta).ln() / (alpha * alpha * chi);
    Ok(BoundReport {
        value: first.max(second),
        kind: BoundKind::LowerBound,
        constant_known: true,
        formula: FormulaId::FixedKnownLower,
        inputs: BoundInputs {
            family: Some(family),
            m: Some(m),
            ..inputs(alpha, delta, theta0, theta1)
        },
        branches: vec![first, second],
        theta_star: None,
        note: None,
    })
}

/// Lower bound on `E[N]` for fixed-`m` procedures that do not know the
/// parameters, for Bernoulli arms close enough together:
/// `min{1/m, v*} ln(1/delta) / (m (alpha (1 - alpha) (theta1 - theta0)^2 / v*)^2)`
/// with `v* = theta*(1 - theta*)`.
pub fn lb_fixed_unknown(
    alpha: f64,
    delta: f64,
    family: ArmFamily,
    theta0: f64,
    theta1: f64,
    m: u32,
) -> Result<BoundReport> {
    if family != ArmFamily::Bernoulli {
        return Err(Error::UnsupportedFamily(family.name()));
    }
    check_alpha(alpha)?;
    check_delta(delta)?;
    let gap = check_gap(theta0, theta1)?;
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let closeness = (theta0 * (1.0 - theta0)).min(theta1 * (1.0 - theta1));
    if 2.0 * gap > closeness {
        return Err(Error::Precondition(format!(
            "2 (theta1 - theta0) <= min(theta0 (1 - theta0), theta1 (1 - theta1)) fails: {} > {}",
            2.0 * gap,
            closeness
        )));
    }
    let spec = MixtureSpec::new(alpha.min(0.5), theta0, theta1, family)?
        .with_alpha_override(alpha)?;
    let theta_star = divergence::mixture_bound_constants(&spec, m)?.theta_star;
    let v = theta_star * (1.0 - theta_star);
    let m_cap = v / (gap * gap);
    if m as f64 > m_cap {
        return Err(Error::Precondition(format!(
            "m <= theta*(1 - theta*)/(theta1 - theta0)^2 fails: {m} > {m_cap}"
        )));
    }
    let mf = m as f64;
    let value = (1.0 / mf).min(v) * (1.0 / delta).ln()
        / (mf * (alpha * (1.0 - alpha) * gap * gap / v).powi(2));
    Ok(BoundReport {
        value,
        kind: BoundKind::LowerBound,
        constant_known: false,
        formula: FormulaId::FixedUnknownLower,
        inputs: BoundInputs {
            family: Some(family),
            m: Some(m),
            ..inputs(alpha, delta, theta0, theta1)
        },
        branches: Vec::new(),
        theta_star: Some(theta_star),
        note: None,
    })
}

/// Upper bound on `E[T]` for the given knowledge regime, with `epsilon =
/// theta1 - theta0`.
///
/// The adaptive-known row is the explicit SPRT bound
/// `16/eps^2 ((1 - alpha)/alpha + ln((1 - alpha)(1 - delta)/(alpha delta)))`;
/// the others carry an unnamed constant set to 1. Log factors are clamped at 0.
pub fn upper_bound(
    regime: KnowledgeRegime,
    alpha: f64,
    delta: f64,
    theta0: f64,
    theta1: f64,
) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_delta(delta)?;
    let eps = check_gap(theta0, theta1)?;
    let scale = 1.0 / (alpha * eps * eps);
    let (value, constant_known) = match regime {
        KnowledgeRegime::FixedKnown => (pos_ln(1.0 / (delta * alpha)) * scale, false),
        KnowledgeRegime::AdaptiveKnown => {
            let odds = (1.0 - alpha) / alpha;
            let v = 16.0 / (eps * eps)
                * (odds + ((1.0 - alpha) * (1.0 - delta) / (alpha * delta)).ln());
            (v.max(0.0), true)
        }
        KnowledgeRegime::UnknownThetas => {
            (pos_ln(pos_ln(1.0 / (eps * eps)) / delta) * scale, false)
        }
        KnowledgeRegime::UnknownAlpha => (pos_ln(pos_ln(1.0 / alpha) / delta) * scale, false),
        KnowledgeRegime::UnknownAll => {
            let l = pos_ln(scale);
            (l * pos_ln(l / delta) * scale, false)
        }
    };
    Ok(BoundReport {
        value,
        kind: BoundKind::UpperBound,
        constant_known,
        formula: FormulaId::Upper(regime),
        inputs: inputs(alpha, delta, theta0, theta1),
        branches: Vec::new(),
        theta_star: None,
        note: None,
    })
}

/// Explicit upper bound on `E[m N_m]` for the fixed-sample strategy:
/// `3 (ln(1/alpha) + ln(12 ln(6/delta)/delta)) / (alpha eps^2)`.
pub fn ub_fixed_sample_explicit(
    alpha: f64,
    delta: f64,
    theta0: f64,
    theta1: f64,
) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_delta(delta)?;
    let eps = check_gap(theta0, theta1)?;
    let value = 3.0 * ((1.0 / alpha).ln() + (12.0 * (6.0 / delta).ln() / delta).ln())
        / (alpha * eps * eps);
    Ok(BoundReport {
        value,
        kind: BoundKind::UpperBound,
        constant_known: true,
        formula: FormulaId::FixedSampleExplicit,
        inputs: inputs(alpha, delta, theta0, theta1),
        branches: Vec::new(),
        theta_star: None,
        note: None,
    })
}

/// Detailed upper bound for the fully adaptive strategy, with `g = 1/(alpha eps^2)`:
/// `log2(g) g (alpha log2(1/eps^2) + ln(log2 g) + ln(1/delta))`.
pub fn ub_fully_adaptive_detailed(
    alpha: f64,
    delta: f64,
    theta0: f64,
    theta1: f64,
) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_delta(delta)?;
    let eps = check_gap(theta0, theta1)?;
    let g = 1.0 / (alpha * eps * eps);
    let lg = g.log2().max(0.0);
    let value = lg
        * g
        * (alpha * (1.0 / (eps * eps)).log2().max(0.0) + pos_ln(lg) + (1.0 / delta).ln());
    Ok(BoundReport {
        value,
        kind: BoundKind::UpperBound,
        constant_known: false,
        formula: FormulaId::FullyAdaptiveDetailed,
        inputs: inputs(alpha, delta, theta0, theta1),
        branches: Vec::new(),
        theta_star: None,
        note: None,
    })
}

/// Every bound that applies to the given inputs, in a fixed order. Bounds whose
/// preconditions fail are skipped.
pub fn all_bounds(
    alpha: f64,
    delta: f64,
    family: ArmFamily,
    theta0: f64,
    theta1: f64,
    m: u32,
) -> Result<Vec<BoundReport>> {
    let mut out = vec![
        lb_adaptive_known(alpha, delta, family, theta0, theta1)?,
        lb_fixed_known(alpha, delta, family, theta0, theta1, m)?,
    ];
    if let Ok(r) = lb_fixed_unknown(alpha, delta, family, theta0, theta1, m) {
        out.push(r);
    }
    for regime in KnowledgeRegime::ALL {
        out.push(upper_bound(regime, alpha, delta, theta0, theta1)?);
    }
    out.push(ub_fixed_sample_explicit(alpha, delta, theta0, theta1)?);
    out.push(ub_fully_adaptive_detailed(alpha, delta, theta0, theta1)?);
    Ok(out)
}
