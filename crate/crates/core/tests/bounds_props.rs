use coinbag::bounds::{lb_adaptive_known, lb_fixed_known, lb_fixed_unknown, upper_bound, KnowledgeRegime};
use coinbag::ArmFamily;
use proptest::prelude::*;

const BERN: ArmFamily = ArmFamily::Bernoulli;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adaptive_upper_bound_sits_above_lower_bound(
        alpha in 0.001f64..=0.2,
        theta0 in 0.05f64..0.75,
        eps in 0.001f64..=0.2,
        delta in 0.001f64..0.5,
    ) {
        let lb = lb_adaptive_known(alpha, delta, BERN, theta0, theta0 + eps).unwrap();
        let ub = upper_bound(KnowledgeRegime::AdaptiveKnown, alpha, delta, theta0, theta0 + eps).unwrap();
        prop_assert!(ub.value >= lb.value, "{} < {}", ub.value, lb.value);
    }

    #[test]
    fn unknown_parameters_cost_at_least_one_over_two_alpha(
        alpha in 0.001f64..=0.2,
        theta0 in 0.2f64..0.75,
        eps in 0.0005f64..=0.01,
        delta in 0.001f64..0.5,
    ) {
        let known = lb_fixed_known(alpha, delta, BERN, theta0, theta0 + eps, 1).unwrap();
        let unknown = lb_fixed_unknown(alpha, delta, BERN, theta0, theta0 + eps, 1).unwrap();
        let ratio = unknown.value / known.branches[1];
        prop_assert!(ratio >= 1.0 / (2.0 * alpha), "ratio {}", ratio);
    }

    #[test]
    fn fixed_known_second_branch_shrinks_with_m(
        alpha in 0.01f64..=0.5,
        theta0 in 0.05f64..0.8,
        eps in 0.01f64..0.15,
        m in 1u32..200,
    ) {
        let a = lb_fixed_known(alpha, 0.1, BERN, theta0, theta0 + eps, m).unwrap();
        let b = lb_fixed_known(alpha, 0.1, BERN, theta0, theta0 + eps, m + 1).unwrap();
        prop_assert!(b.branches[1] <= a.branches[1]);
    }
}

#[test]
fn unknown_to_known_ratio_grows_as_gap_shrinks() {
    for alpha in [0.01, 0.05, 0.2] {
        let mut last = 0.0;
        for eps in [0.02, 0.01, 0.005, 0.002, 0.001] {
            let known = lb_fixed_known(alpha, 0.1, BERN, 0.4, 0.4 + eps, 1).unwrap();
            let unknown = lb_fixed_unknown(alpha, 0.1, BERN, 0.4, 0.4 + eps, 1).unwrap();
            let ratio = unknown.value / known.branches[1];
            assert!(ratio > last, "alpha={alpha} eps={eps}");
            last = ratio;
        }
    }
}
