use coinbag::bag::{StageInfo, Termination, TraceKind};
use coinbag::harness::{
    run_trial, run_trials, wilson_radius, Execution, ExperimentConfig, StrategyConfig, Z_95,
};
use coinbag::strategies::{FixedSampleConfig, SprtConfig};
use coinbag::{ArmFamily, MixtureSpec, SessionOptions, StrategyOutcome};
use proptest::prelude::*;

const STRATEGIES: [&str; 5] = [
    "fixed_sample",
    "adaptive_sprt",
    "doubling_epsilon",
    "doubling_alpha",
    "fully_adaptive",
];

fn check_trace(out: &StrategyOutcome) -> Result<(), TestCaseError> {
    let mut current = None;
    let mut draws = 0u64;
    let mut samples = 0u64;
    let mut terminal = 0;
    for (i, ev) in out.trace.iter().enumerate() {
        prop_assert_eq!(terminal, 0, "event after termination at {}", i);
        match ev.kind {
            TraceKind::DrawArm => {
                draws += 1;
                prop_assert_eq!(ev.arm, Some(draws));
                current = ev.arm;
            }
            TraceKind::Sample(_) => {
                samples += 1;
                prop_assert!(current.is_some());
                prop_assert_eq!(ev.arm, current);
            }
            TraceKind::DeclareHeavy => {
                prop_assert_eq!(ev.arm, current);
                terminal += 1;
            }
            TraceKind::DeclareNull | TraceKind::BudgetExhausted => terminal += 1,
        }
        prop_assert_eq!(ev.t, samples);
    }
    prop_assert_eq!(terminal, 1);
    prop_assert!(out.trace.last().unwrap().kind.is_terminal());
    prop_assert_eq!(out.total_samples, samples);
    prop_assert_eq!(out.arms_drawn, draws);
    if out.termination == Termination::DeclaredHeavy {
        prop_assert_eq!(out.declared, current);
    }
    Ok(())
}

fn family(which: u8) -> ArmFamily {
    match which {
        0 => ArmFamily::Bernoulli,
        1 => ArmFamily::Gaussian { sigma: 0.3 },
        _ => ArmFamily::BoundedBeta { concentration: 8.0 },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_strategy_follows_the_protocol(
        which in 0u8..3,
        alpha in 0.1f64..=0.5,
        theta0 in 0.1f64..0.4,
        gap in 0.25f64..0.5,
        strategy in 0usize..5,
        seed in any::<u64>(),
        index in 0u64..1000,
    ) {
        let spec = MixtureSpec::new(alpha, theta0, theta0 + gap, family(which)).unwrap();
        let strategy = StrategyConfig::by_name(STRATEGIES[strategy], 0.1).unwrap().resolve(&spec).unwrap();
        let options = SessionOptions { record_trace: true, max_total_samples: 300_000 };
        let out = run_trial(&strategy, &spec, seed, index, options).unwrap();
        check_trace(&out)?;
    }

    #[test]
    fn budget_stops_on_the_exact_sample(seed in any::<u64>(), budget in 1u64..5_000) {
        let spec = MixtureSpec::new(0.1, 0.45, 0.55, ArmFamily::Bernoulli).unwrap();
        let strategy = StrategyConfig::by_name("fully_adaptive", 0.1).unwrap().resolve(&spec).unwrap();
        let options = SessionOptions { record_trace: true, max_total_samples: budget };
        let out = run_trial(&strategy, &spec, seed, 0, options).unwrap();
        check_trace(&out)?;
        prop_assert!(out.total_samples <= budget);
        if out.termination == Termination::BudgetExhausted {
            prop_assert_eq!(out.total_samples, budget);
        }
    }

    #[test]
    fn fixed_sample_uses_m_flips_per_arm(
        alpha in 0.05f64..=0.5,
        theta0 in 0.05f64..0.6,
        gap in 0.1f64..0.4,
        seed in any::<u64>(),
    ) {
        let spec = MixtureSpec::new(alpha, theta0, theta0 + gap, ArmFamily::Bernoulli).unwrap();
        let cfg = FixedSampleConfig::new(alpha, theta0, theta0 + gap, 0.1).unwrap();
        let strategy = StrategyConfig::by_name("fixed_sample", 0.1).unwrap();
        let records = run_trials(&ExperimentConfig::new(spec, strategy, 20, seed)).unwrap();
        for r in records {
            prop_assert!(r.arms_drawn <= cfg.n_hat());
            prop_assert_eq!(r.total_samples, cfg.m() * r.arms_drawn);
        }
    }

    #[test]
    fn sprt_never_exceeds_its_cap(
        alpha in 0.1f64..=0.5,
        theta0 in 0.1f64..0.5,
        gap in 0.2f64..0.4,
        seed in any::<u64>(),
    ) {
        let spec = MixtureSpec::new(alpha, theta0, theta0 + gap, ArmFamily::Bernoulli).unwrap();
        let cap = SprtConfig::new(0.1, alpha, gap).unwrap().sample_cap();
        let strategy = StrategyConfig::by_name("adaptive_sprt", 0.1).unwrap();
        let records = run_trials(&ExperimentConfig::new(spec, strategy, 20, seed)).unwrap();
        for r in records {
            prop_assert!(r.total_samples <= cap);
        }
    }
}

// P(stage >= k* + i) <= (5/4) 5^-i, where k* is the first stage whose guess
// is below the truth
fn check_stage_tail(spec: MixtureSpec, strategy: StrategyConfig, first_good: u32, trials: u64) {
    let cfg = ExperimentConfig::new(spec, strategy, trials, 17).with_execution(Execution::default());
    let records = run_trials(&cfg).unwrap();
    for i in 1..=3u32 {
        let late = records
            .iter()
            .filter(|r| match r.stage {
                StageInfo::Doubling { k } => k >= first_good + i,
                _ => panic!("unexpected stage {:?}", r.stage),
            })
            .count() as u64;
        let bound = 1.25 * 0.2f64.powi(i as i32);
        let slack = 3.0 * wilson_radius(late, trials, Z_95);
        let rate = late as f64 / trials as f64;
        assert!(rate <= bound + slack, "{} i={i}: {rate} > {bound} + {slack}", strategy.name());
    }
}

#[test]
fn doubling_epsilon_stage_tail_is_geometric() {
    let spec = MixtureSpec::new(0.3, 0.35, 0.65, ArmFamily::Bernoulli).unwrap();
    // 2^-2 <= 0.3
    check_stage_tail(spec, StrategyConfig::by_name("doubling_epsilon", 0.1).unwrap(), 2, 1000);
}

#[test]
fn doubling_alpha_stage_tail_is_geometric() {
    let spec = MixtureSpec::new(0.05, 0.4, 0.7, ArmFamily::Bernoulli).unwrap();
    // 2^-5 <= 0.05
    check_stage_tail(spec, StrategyConfig::by_name("doubling_alpha", 0.1).unwrap(), 5, 500);
}
