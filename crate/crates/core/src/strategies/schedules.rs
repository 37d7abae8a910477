//! Parameter-free wrappers that rerun the SPRT-like strategy on a geometric
//! schedule of guesses, continuing in the same session so all stages share a
//! single sample count.

use crate::bag::{BagSession, StageInfo, StrategyOutcome};
use crate::error::{Error, Result};

use super::check_open_unit;
use super::sprt::{sprt_pass, SprtConfig};

/// Confidence spent on stage `k` of a doubling schedule: `delta / (2 k^2)`.
pub fn stage_delta(delta: f64, k: u32) -> f64 {
    delta / (2.0 * (k as f64).powi(2))
}

/// The `(alpha_k, epsilon_k)` grid visited at level `ell`: `alpha_k = 2^k / 2^ell`,
/// `epsilon_k = sqrt(1 / (2 alpha_k 2^ell))` for `k = 0..ell`.
pub fn landmarks(ell: u32) -> Vec<(f64, f64)> {
    let gamma = 2f64.powi(ell as i32);
    (0..ell)
        .map(|k| {
            let a = 2f64.powi(k as i32) / gamma;
            (a, (1.0 / (2.0 * a * gamma)).sqrt())
        })
        .collect()
}

fn run_stages<I>(session: &mut BagSession, stages: I) -> Result<StrategyOutcome>
where
    I: IntoIterator<Item = Result<(StageInfo, SprtConfig)>>,
{
    for stage in stages {
        let (info, cfg) = stage?;
        match sprt_pass(&cfg, session) {
            Ok(Some(mut out)) => {
                out.stage = info;
                return Ok(out);
            }
            Ok(None) => {}
            Err(e) => {
                // budget exhaustion still reports the stage it happened in
                let mut out = session.finish(Err(e))?;
                out.stage = info;
                return Ok(out);
            }
        }
    }
    unreachable!("schedules are unbounded")
}

fn check_delta(delta: f64) -> Result<()> {
    check_open_unit("delta", delta, 1.0)
}

/// Unknown gap: stage `k` guesses `epsilon0 = 2^-k` with the true `alpha`.
pub fn run_doubling_epsilon(
    delta: f64,
    alpha: f64,
    session: &mut BagSession,
) -> Result<StrategyOutcome> {
    check_delta(delta)?;
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1/2], got {alpha}")));
    }
    let stages = (1u32..).map(move |k| {
        let cfg = SprtConfig::new(stage_delta(delta, k), alpha, 0.5f64.powi(k as i32))?;
        Ok((StageInfo::Doubling { k }, cfg))
    });
    run_stages(session, stages)
}

/// Unknown heavy fraction: stage `k` guesses `alpha0 = 2^-k` with the true gap.
pub fn run_doubling_alpha(
    delta: f64,
    epsilon: f64,
    session: &mut BagSession,
) -> Result<StrategyOutcome> {
    check_delta(delta)?;
    let stages = (1u32..).map(move |k| {
        let cfg = SprtConfig::new(stage_delta(delta, k), 0.5f64.powi(k as i32), epsilon)?;
        Ok((StageInfo::Doubling { k }, cfg))
    });
    run_stages(session, stages)
}

/// Nothing known: level `ell` spends `delta / (2 ell^3)` on each landmark of
/// [`landmarks`], so that every `(alpha, epsilon)` with
/// `1/(alpha epsilon^2) <= 2^ell` is covered up to a factor of two.
pub fn run_fully_adaptive(delta: f64, session: &mut BagSession) -> Result<StrategyOutcome> {
    check_delta(delta)?;
    let stages = (1u32..).flat_map(move |ell| {
        let level_delta = delta / (2.0 * (ell as f64).powi(3));
        landmarks(ell)
            .into_iter()
            .enumerate()
            .map(move |(k, (a, e))| {
                let cfg = SprtConfig::new(level_delta, a, e)?;
                Ok((StageInfo::Landmark { ell, k: k as u32 }, cfg))
            })
    });
    run_stages(session, stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bag::{SessionOptions, Termination};
    use crate::model::{ArmFamily, MixtureSpec, RandomSource};

    #[test]
    fn stage_budgets_sum_below_delta() {
        let total: f64 = (1..10_000).map(|k| stage_delta(0.1, k)).sum();
        assert!(total <= 0.1);
        assert_eq!(stage_delta(0.1, 1), 0.05);
        assert_eq!(stage_delta(0.1, 3), 0.1 / 18.0);
    }

    #[test]
    fn landmark_values() {
        let l = landmarks(3);
        let want = [
            (0.125, std::f64::consts::FRAC_1_SQRT_2),
            (0.25, 0.5),
            (0.5, 0.353_553_390_593_273_8),
        ];
        assert_eq!(l.len(), 3);
        for ((a, e), (wa, we)) in l.iter().zip(want) {
            assert_eq!(*a, wa);
            assert!((e - we).abs() < 1e-15);
        }
        for ell in 1..12 {
            for (a, e) in landmarks(ell) {
                let inv = 1.0 / (a * e * e);
                assert!((inv - 2f64.powi(ell as i32 + 1)).abs() < 1e-9 * inv);
                assert!(a <= 0.5);
            }
        }
    }

    fn spec(alpha: f64, t0: f64, t1: f64) -> MixtureSpec {
        MixtureSpec::new(alpha, t0, t1, ArmFamily::Bernoulli).unwrap()
    }

    #[test]
    fn doubling_epsilon_records_stage() {
        let mut s = BagSession::new(spec(0.5, 0.0, 1.0), RandomSource::new(2, 0), Default::default());
        let out = run_doubling_epsilon(0.1, 0.5, &mut s).unwrap();
        assert_eq!(out.correct, Some(true));
        assert!(matches!(out.stage, StageInfo::Doubling { k } if k >= 1));
    }

    #[test]
    fn doubling_alpha_finds_heavy() {
        let mut s = BagSession::new(spec(0.3, 0.2, 0.8), RandomSource::new(5, 1), Default::default());
        let out = run_doubling_alpha(0.1, 0.6, &mut s).unwrap();
        assert_eq!(out.termination, Termination::DeclaredHeavy);
        assert!(matches!(out.stage, StageInfo::Doubling { .. }));
    }

    #[test]
    fn fully_adaptive_records_landmark() {
        let mut s = BagSession::new(spec(0.5, 0.0, 1.0), RandomSource::new(8, 0), Default::default());
        let out = run_fully_adaptive(0.1, &mut s).unwrap();
        assert_eq!(out.correct, Some(true));
        match out.stage {
            StageInfo::Landmark { ell, k } => assert!(k < ell),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_light_bag_hits_budget() {
        let opts = SessionOptions {
            record_trace: false,
            max_total_samples: 200_000,
        };
        let mut s = BagSession::new(spec(0.0, 0.3, 0.6), RandomSource::new(1, 0), opts);
        let out = run_fully_adaptive(0.1, &mut s).unwrap();
        assert_eq!(out.termination, Termination::BudgetExhausted);
        assert_eq!(out.total_samples, 200_000);
    }
}
