use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArmFamily, MixtureSpec};

/// Natural-parameter geometry of the families the mixture bound is evaluated on.
///
/// `Binomial { trials: m }` is the law of the number of heads in `m` Bernoulli
/// flips, `Gaussian { sigma }` a normal with known scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpFamilyDescriptor {
    Binomial { trials: u32 },
    Gaussian { sigma: f64 },
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `(theta_h, theta_l)`: maximiser and minimiser of `theta (1 - theta)` on
/// `[theta0, theta1]`.
pub fn variance_extremes(theta0: f64, theta1: f64) -> (f64, f64) {
    let h = if theta1 <= 0.5 {
        theta1
    } else if theta0 >= 0.5 {
        theta0
    } else {
        0.5
    };
    // the endpoint farther from 1/2
    let l = if (theta0 - 0.5).abs() >= (theta1 - 0.5).abs() {
        theta0
    } else {
        theta1
    };
    (h, l)
}

impl ExpFamilyDescriptor {
    /// Descriptor for the law of `m` pooled observations of one arm: the head
    /// count for Bernoulli arms, the sample mean for Gaussian arms.
    pub fn for_arms(family: ArmFamily, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        match family {
            ArmFamily::Bernoulli => Ok(ExpFamilyDescriptor::Binomial { trials: m }),
            ArmFamily::Gaussian { sigma } => Ok(ExpFamilyDescriptor::Gaussian {
                sigma: sigma / (m as f64).sqrt(),
            }),
            ArmFamily::BoundedBeta { .. } => Err(Error::UnsupportedFamily(family.name())),
        }
    }

    pub fn eta(&self, theta: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { .. } => logit(theta),
            ExpFamilyDescriptor::Gaussian { sigma } => theta / (sigma * sigma),
        }
    }

    pub fn eta_inv(&self, nu: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { .. } => sigmoid(nu),
            ExpFamilyDescriptor::Gaussian { sigma } => nu * sigma * sigma,
        }
    }

    /// Log-partition function `b(nu)`.
    pub fn b(&self, nu: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { trials } => trials as f64 * softplus(nu),
            ExpFamilyDescriptor::Gaussian { sigma } => 0.5 * nu * nu * sigma * sigma,
        }
    }

    /// Mean map `b'(nu)`.
    pub fn b_dot(&self, nu: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { trials } => trials as f64 * sigmoid(nu),
            ExpFamilyDescriptor::Gaussian { sigma } => nu * sigma * sigma,
        }
    }

    pub fn b_dot_inv(&self, x: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { trials } => logit(x / trials as f64),
            ExpFamilyDescriptor::Gaussian { sigma } => x / (sigma * sigma),
        }
    }

    /// Second central moment `M_2(theta)`.
    pub fn m2(&self, theta: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { trials } => trials as f64 * theta * (1.0 - theta),
            ExpFamilyDescriptor::Gaussian { sigma } => sigma * sigma,
        }
    }

    /// Fourth central moment `M_4(theta)`.
    pub fn m4(&self, theta: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { trials } => {
                let m = trials as f64;
                let v = theta * (1.0 - theta);
                m * v * (1.0 + 3.0 * v * (m - 2.0))
            }
            ExpFamilyDescriptor::Gaussian { sigma } => 3.0 * sigma.powi(4),
        }
    }

    /// Density at `x` of the member with natural parameter `nu`; for the
    /// Binomial the coefficient is extended to real `x` through Gamma functions.
    pub fn density(&self, x: f64, nu: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { trials } => {
                let m = trials as f64;
                if !(0.0..=m).contains(&x) {
                    return 0.0;
                }
                let ln_coef = -((m + 1.0).ln())
                    - statrs::function::beta::ln_beta(m - x + 1.0, x + 1.0);
                (ln_coef + nu * x - self.b(nu)).exp()
            }
            ExpFamilyDescriptor::Gaussian { sigma } => {
                let mean = self.b_dot(nu);
                (-(x - mean).powi(2) / (2.0 * sigma * sigma)).exp()
                    / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }

    /// `sup_{theta in [theta0, theta1]} M_2(theta)`.
    pub fn max_m2(&self, theta0: f64, theta1: f64) -> f64 {
        self.m2(variance_extremes(theta0, theta1).0)
    }

    /// Closed-form `kappa`, an upper bound on
    /// `sup_y b(2 eta(y) - eta*) - 2 b(eta(y)) + b(eta*)` over `[theta0, theta1]`.
    pub fn kappa(&self, theta0: f64, theta1: f64, theta_star: f64) -> f64 {
        let gap2 = (theta1 - theta0).powi(2);
        match *self {
            ExpFamilyDescriptor::Binomial { trials } => {
                trials as f64 * gap2 / (theta_star * (1.0 - theta_star))
            }
            ExpFamilyDescriptor::Gaussian { sigma } => gap2 / (sigma * sigma),
        }
    }

    /// Closed-form `gamma`, an upper bound on the density envelope
    /// `sup_x density(x, b_dot_inv(x))` over the relevant range of `x`.
    pub fn envelope(&self, theta0: f64, theta1: f64) -> f64 {
        match *self {
            ExpFamilyDescriptor::Binomial { trials } => {
                let l = variance_extremes(theta0, theta1).1;
                2.0 / (trials as f64 * l * (1.0 - l)).sqrt()
            }
            ExpFamilyDescriptor::Gaussian { sigma } => {
                1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt()
            }
        }
    }
}

/// Ingredients of the chi-squared bound between a two-point mixture and its
/// geometric mixture point `theta_star`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixtureBoundConstants {
    pub theta_star: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub kappa: f64,
    pub gamma_envelope: f64,
    pub c: f64,
    /// `eta(theta1) - eta(theta0)`.
    pub eta_gap: f64,
}

impl MixtureBoundConstants {
    /// `c * (alpha (1 - alpha) eta_gap^2 / 2)^2`.
    pub fn chi2_bound(&self, alpha: f64) -> f64 {
        self.c * (0.5 * alpha * (1.0 - alpha) * self.eta_gap * self.eta_gap).powi(2)
    }
}

/// Constants of the exponential-family mixture bound for `m` pooled
/// observations per arm.
pub fn mixture_bound_constants(spec: &MixtureSpec, m: u32) -> Result<MixtureBoundConstants> {
    let fam = ExpFamilyDescriptor::for_arms(spec.family(), m)?;
    let (t0, t1, a) = (spec.theta0(), spec.theta1(), spec.alpha());
    if let ExpFamilyDescriptor::Binomial { .. } = fam {
        if t0 <= 0.0 || t1 >= 1.0 {
            return Err(Error::Precondition(
                "Bernoulli means must lie strictly inside (0, 1) for natural parameters".into(),
            ));
        }
    }
    let (e0, e1) = (fam.eta(t0), fam.eta(t1));
    let eta_gap = e1 - e0;
    let eta_star = (1.0 - a) * e0 + a * e1;
    let eta_minus = e0 - a * eta_gap;
    let eta_plus = e1 + (1.0 - a) * eta_gap;
    let theta_star = if a == 0.0 { t0 } else { fam.eta_inv(eta_star) };
    let theta_minus = if a == 0.0 { t0 } else { fam.eta_inv(eta_minus) };
    let theta_plus = fam.eta_inv(eta_plus);

    let kappa = fam.kappa(t0, t1, theta_star);
    let gamma = fam.envelope(t0, t1);
    let d = fam.b_dot(eta_plus) - fam.b_dot(eta_minus);
    let c = kappa.exp()
        * (fam.max_m2(t0, t1).powi(2) * (2.0 + gamma * d)
            + 8.0 * fam.m4(theta_minus)
            + 8.0 * fam.m4(theta_plus)
            + 16.0 * d.powi(4)
            + 0.4 * gamma * d.powi(5));
    if !c.is_finite() {
        return Err(Error::NumericFailure(format!("bound constant overflowed (kappa = {kappa})")));
    }
    Ok(MixtureBoundConstants {
        theta_star,
        theta_minus,
        theta_plus,
        kappa,
        gamma_envelope: gamma,
        c,
        eta_gap,
    })
}

/// Right-hand side of the mixture chi-squared bound at `theta_star`.
pub fn mixture_chi2_bound(spec: &MixtureSpec, m: u32) -> Result<f64> {
    Ok(mixture_bound_constants(spec, m)?.chi2_bound(spec.alpha()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn descriptors() -> Vec<ExpFamilyDescriptor> {
        vec![
            ExpFamilyDescriptor::Binomial { trials: 1 },
            ExpFamilyDescriptor::Binomial { trials: 7 },
            ExpFamilyDescriptor::Gaussian { sigma: 0.8 },
        ]
    }

    #[test]
    fn eta_round_trip_and_monotone() {
        for fam in descriptors() {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..100 {
                let theta = i as f64 / 100.0;
                let nu = fam.eta(theta);
                assert!(nu > prev);
                prev = nu;
                assert!((fam.eta_inv(nu) - theta).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn mean_map_matches_family_mean() {
        for fam in descriptors() {
            let scale = match fam {
                ExpFamilyDescriptor::Binomial { trials } => trials as f64,
                ExpFamilyDescriptor::Gaussian { .. } => 1.0,
            };
            for theta in [0.1, 0.42, 0.9] {
                let x = fam.b_dot(fam.eta(theta));
                assert!((x - scale * theta).abs() <= 1e-12);
                assert!((fam.b_dot_inv(x) - fam.eta(theta)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn mean_map_is_derivative_of_log_partition() {
        for fam in descriptors() {
            for nu in [-1.3, 0.0, 0.4, 2.1] {
                let h = 1e-5;
                let fd = (fam.b(nu + h) - fam.b(nu - h)) / (2.0 * h);
                assert!((fd - fam.b_dot(nu)).abs() <= 1e-7, "{fam:?} {nu}");
            }
        }
    }

    #[test]
    fn binomial_moments_match_pmf() {
        let fam = ExpFamilyDescriptor::Binomial { trials: 6 };
        let theta = 0.37;
        let mean = 6.0 * theta;
        let (mut m2, mut m4) = (0.0, 0.0);
        for k in 0..=6u32 {
            let p = crate::divergence::binomial_pmf(6, k, theta);
            m2 += p * (k as f64 - mean).powi(2);
            m4 += p * (k as f64 - mean).powi(4);
        }
        assert!((fam.m2(theta) - m2).abs() < 1e-12);
        assert!((fam.m4(theta) - m4).abs() < 1e-12);
    }

    #[test]
    fn variance_extremes_cases() {
        assert_eq!(variance_extremes(0.1, 0.3), (0.3, 0.1));
        assert_eq!(variance_extremes(0.6, 0.8), (0.6, 0.8));
        assert_eq!(variance_extremes(0.4, 0.9), (0.5, 0.9));
        assert_eq!(variance_extremes(0.2, 0.7), (0.5, 0.2));
    }

    #[test]
    fn theta_star_examples() {
        let spec = MixtureSpec::new(0.5, 0.3, 0.7, ArmFamily::Bernoulli).unwrap();
        let k = mixture_bound_constants(&spec, 1).unwrap();
        assert!((k.theta_star - 0.5).abs() < 1e-15);

        let spec = MixtureSpec::new(0.2, -0.4, 0.6, ArmFamily::Gaussian { sigma: 1.3 }).unwrap();
        let k = mixture_bound_constants(&spec, 3).unwrap();
        assert!((k.theta_star - (0.8 * -0.4 + 0.2 * 0.6)).abs() < 1e-14);

        let spec = MixtureSpec::new(0.0, 0.3, 0.5, ArmFamily::Bernoulli).unwrap();
        let k = mixture_bound_constants(&spec, 2).unwrap();
        assert_eq!(k.theta_star, 0.3);
        assert_eq!(k.theta_minus, 0.3);
    }

    #[test]
    fn ordering_and_finiteness() {
        for (a, t0, t1, m) in [(0.1, 0.45, 0.5, 10u32), (0.3, 0.2, 0.25, 3), (0.5, 0.6, 0.62, 40)] {
            let spec = MixtureSpec::new(a, t0, t1, ArmFamily::Bernoulli).unwrap();
            let k = mixture_bound_constants(&spec, m).unwrap();
            assert!(k.theta_minus <= t0 && t0 <= k.theta_star && k.theta_star <= t1);
            assert!(t1 <= k.theta_plus);
            for v in [k.kappa, k.gamma_envelope, k.c] {
                assert!(v.is_finite() && v >= 0.0);
            }
        }
    }

    #[test]
    fn kappa_dominates_log_partition_gap() {
        let cases = [
            (ArmFamily::Bernoulli, 0.2, 0.45, 0.3, 5u32),
            (ArmFamily::Bernoulli, 0.55, 0.6, 0.1, 30),
            (ArmFamily::Gaussian { sigma: 1.0 }, 0.0, 0.9, 0.4, 2),
        ];
        for (family, t0, t1, a, m) in cases {
            let spec = MixtureSpec::new(a, t0, t1, family).unwrap();
            let k = mixture_bound_constants(&spec, m).unwrap();
            let fam = ExpFamilyDescriptor::for_arms(family, m).unwrap();
            let es = fam.eta(k.theta_star);
            for i in 0..=200 {
                let y = t0 + (t1 - t0) * i as f64 / 200.0;
                let ey = fam.eta(y);
                let gap = fam.b(2.0 * ey - es) - 2.0 * fam.b(ey) + fam.b(es);
                assert!(gap <= k.kappa * (1.0 + 1e-12) + 1e-14, "{y}: {gap} > {}", k.kappa);
            }
        }
    }

    #[test]
    fn binomial_envelope_dominates_gamma_extended_density() {
        // Small gaps, as required for the bound to apply.
        for (a, t0, t1, m) in [(0.1, 0.45, 0.5, 10u32), (0.4, 0.3, 0.33, 20), (0.25, 0.7, 0.71, 100)] {
            let spec = MixtureSpec::new(a, t0, t1, ArmFamily::Bernoulli).unwrap();
            let k = mixture_bound_constants(&spec, m).unwrap();
            let fam = ExpFamilyDescriptor::Binomial { trials: m };
            let (lo, hi) = (m as f64 * k.theta_minus, m as f64 * k.theta_plus);
            for i in 0..=400 {
                let x = lo + (hi - lo) * i as f64 / 400.0;
                let v = fam.density(x, fam.b_dot_inv(x));
                assert!(v <= k.gamma_envelope, "x={x}: {v} > {}", k.gamma_envelope);
            }
        }
    }

    #[test]
    fn gaussian_envelope_is_peak_density() {
        let fam = ExpFamilyDescriptor::Gaussian { sigma: 0.7 };
        let peak = fam.density(1.0, fam.b_dot_inv(1.0));
        assert!((peak - fam.envelope(0.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn beta_rejected() {
        let spec =
            MixtureSpec::new(0.1, 0.3, 0.6, ArmFamily::BoundedBeta { concentration: 2.0 }).unwrap();
        assert!(matches!(mixture_bound_constants(&spec, 1), Err(Error::UnsupportedFamily(_))));
    }
}
