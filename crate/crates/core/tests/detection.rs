use coinbag::detect::{plan_gaussian_test, simulate_detection};

#[test]
fn both_error_rates_stay_below_the_planned_bound() {
    for delta_mean in [0.5, 1.0] {
        for alpha in [0.1, 0.2] {
            let plan = plan_gaussian_test(0.0, delta_mean, 1.0, alpha, 0.1).unwrap();
            let r = simulate_detection(&plan, 2000, 9).unwrap();
            let eb = plan.error_bound;
            assert!(r.false_alarm_rate <= eb + 3.0 * r.ci_false_alarm, "{r:?}");
            assert!(r.miss_rate <= eb + 3.0 * r.ci_miss, "{r:?}");
        }
    }
}

#[test]
fn planned_gap_matches_exceedance_difference() {
    for (d, s, a) in [(0.5, 1.0, 0.1), (1.0, 2.0, 0.3), (3.0, 0.5, 0.5)] {
        let plan = plan_gaussian_test(1.0, 1.0 + d, s, a, 0.05).unwrap();
        let diff = plan.exceed_prob_h1() - plan.exceed_prob_h0();
        assert!((plan.epsilon_gap - diff).abs() <= 1e-12);
    }
}
