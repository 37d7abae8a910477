//! Monte Carlo experiment runner.
//!
//! Trial `i` of a batch always uses `RandomSource::new(base_seed, i)` and the
//! per-trial records are aggregated in index order, so a batch is bit-for-bit
//! reproducible whatever the thread count.

mod crossing;
mod stats;
mod sweep;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bag::{BagSession, SessionOptions, StageInfo, StrategyOutcome, Termination};
use crate::error::{Error, Result};
use crate::model::{MixtureSpec, RandomSource};
use crate::strategies::{
    run_adaptive_sprt, run_doubling_alpha, run_doubling_epsilon, run_fixed_sample,
    run_fully_adaptive, FixedSampleConfig, SprtConfig,
};

pub use crossing::{probe_linear_crossing, CrossingEstimate, WalkIncrement};
pub use stats::{ols_slope, wilson_interval, wilson_radius, Z_95};
pub use sweep::{sweep, write_csv, SweepGrid, CSV_HEADER};

/// Which strategy to run. Parameters left as `None` are filled in from the
/// problem instance, which gives the well-specified configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum StrategyConfig {
    FixedSample {
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta1: Option<f64>,
    },
    AdaptiveSprt {
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon0: Option<f64>,
    },
    DoublingEpsilon {
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    DoublingAlpha {
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
    },
    FullyAdaptive {
        delta: f64,
    },
}

impl StrategyConfig {
    /// Well-specified configuration of the named strategy.
    pub fn by_name(name: &str, delta: f64) -> Result<Self> {
        Ok(match name {
            "fixed_sample" | "fixed-sample" => StrategyConfig::FixedSample {
                delta,
                alpha: None,
                theta0: None,
                theta1: None,
            },
            "adaptive_sprt" | "adaptive-sprt" | "sprt" => StrategyConfig::AdaptiveSprt {
                delta,
                alpha0: None,
                epsilon0: None,
            },
            "doubling_epsilon" | "doubling-epsilon" => {
                StrategyConfig::DoublingEpsilon { delta, alpha: None }
            }
            "doubling_alpha" | "doubling-alpha" => {
                StrategyConfig::DoublingAlpha { delta, epsilon: None }
            }
            "fully_adaptive" | "fully-adaptive" => StrategyConfig::FullyAdaptive { delta },
            other => {
                return Err(Error::invalid(
                    "strategy",
                    format!(
                        "unknown strategy `{other}` (expected fixed_sample, adaptive_sprt, \
                         doubling_epsilon, doubling_alpha or fully_adaptive)"
                    ),
                ))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::FixedSample { .. } => "fixed_sample",
            StrategyConfig::AdaptiveSprt { .. } => "adaptive_sprt",
            StrategyConfig::DoublingEpsilon { .. } => "doubling_epsilon",
            StrategyConfig::DoublingAlpha { .. } => "doubling_alpha",
            StrategyConfig::FullyAdaptive { .. } => "fully_adaptive",
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            StrategyConfig::FixedSample { delta, .. }
            | StrategyConfig::AdaptiveSprt { delta, .. }
            | StrategyConfig::DoublingEpsilon { delta, .. }
            | StrategyConfig::DoublingAlpha { delta, .. }
            | StrategyConfig::FullyAdaptive { delta } => delta,
        }
    }

    /// Validates the parameters against `spec` and fills in defaults.
    pub fn resolve(&self, spec: &MixtureSpec) -> Result<ResolvedStrategy> {
        Ok(match *self {
            StrategyConfig::FixedSample {
                delta,
                alpha,
                theta0,
                theta1,
            } => ResolvedStrategy::FixedSample(FixedSampleConfig::new(
                alpha.unwrap_or(spec.alpha()),
                theta0.unwrap_or(spec.theta0()),
                theta1.unwrap_or(spec.theta1()),
                delta,
            )?),
            StrategyConfig::AdaptiveSprt {
                delta,
                alpha0,
                epsilon0,
            } => ResolvedStrategy::AdaptiveSprt(SprtConfig::new(
                delta,
                alpha0.unwrap_or(spec.alpha()),
                epsilon0.unwrap_or(spec.gap()),
            )?),
            StrategyConfig::DoublingEpsilon { delta, alpha } => {
                let alpha = alpha.unwrap_or(spec.alpha());
                // validate eagerly so a bad batch fails before any trial runs
                SprtConfig::new(delta / 2.0, alpha, 0.5)?;
                ResolvedStrategy::DoublingEpsilon { delta, alpha }
            }
            StrategyConfig::DoublingAlpha { delta, epsilon } => {
                let epsilon = epsilon.unwrap_or(spec.gap());
                SprtConfig::new(delta / 2.0, 0.5, epsilon)?;
                ResolvedStrategy::DoublingAlpha { delta, epsilon }
            }
            StrategyConfig::FullyAdaptive { delta } => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
                }
                ResolvedStrategy::FullyAdaptive { delta }
            }
        })
    }
}

/// A strategy with validated parameters, ready to run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResolvedStrategy {
    FixedSample(FixedSampleConfig),
    AdaptiveSprt(SprtConfig),
    DoublingEpsilon { delta: f64, alpha: f64 },
    DoublingAlpha { delta: f64, epsilon: f64 },
    FullyAdaptive { delta: f64 },
}

impl ResolvedStrategy {
    pub fn run(&self, session: &mut BagSession) -> Result<StrategyOutcome> {
        match *self {
            ResolvedStrategy::FixedSample(ref c) => run_fixed_sample(c, session),
            ResolvedStrategy::AdaptiveSprt(ref c) => run_adaptive_sprt(c, session),
            ResolvedStrategy::DoublingEpsilon { delta, alpha } => {
                run_doubling_epsilon(delta, alpha, session)
            }
            ResolvedStrategy::DoublingAlpha { delta, epsilon } => {
                run_doubling_alpha(delta, epsilon, session)
            }
            ResolvedStrategy::FullyAdaptive { delta } => run_fully_adaptive(delta, session),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Rayon worker pool; `threads = None` uses the global pool. Without the
    /// `parallel` feature this runs sequentially.
    Parallel {
        #[serde(default)]
        threads: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { threads: None }
    }
}

fn default_max_samples() -> u64 {
    crate::bag::DEFAULT_MAX_TOTAL_SAMPLES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: MixtureSpec,
    pub strategy: StrategyConfig,
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_max_samples")]
    pub max_total_samples: u64,
    /// CSV destination for the aggregated row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(spec: MixtureSpec, strategy: StrategyConfig, trials: u64, base_seed: u64) -> Self {
        Self {
            spec,
            strategy,
            trials,
            base_seed,
            max_total_samples: default_max_samples(),
            output: None,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn validate(&self) -> Result<ResolvedStrategy> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.max_total_samples == 0 {
            return Err(Error::invalid("max_total_samples", "must be at least 1"));
        }
        self.strategy.resolve(&self.spec)
    }
}

/// Compact per-trial result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub index: u64,
    pub declared: Option<u64>,
    pub correct: Option<bool>,
    pub termination: Termination,
    pub total_samples: u64,
    pub arms_drawn: u64,
    pub stage: StageInfo,
}

impl From<(u64, &StrategyOutcome)> for TrialRecord {
    fn from((index, o): (u64, &StrategyOutcome)) -> Self {
        Self {
            index,
            declared: o.declared,
            correct: o.correct,
            termination: o.termination,
            total_samples: o.total_samples,
            arms_drawn: o.arms_drawn,
            stage: o.stage,
        }
    }
}

/// Runs trial `index` of a batch, optionally recording its trace.
pub fn run_trial(
    strategy: &ResolvedStrategy,
    spec: &MixtureSpec,
    base_seed: u64,
    index: u64,
    options: SessionOptions,
) -> Result<StrategyOutcome> {
    let mut session = BagSession::new(*spec, RandomSource::new(base_seed, index), options);
    strategy.run(&mut session)
}

fn map_trials<F>(trials: u64, execution: Execution, f: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(u64) -> Result<TrialRecord> + Sync + Send,
{
    match execution {
        Execution::Sequential => (0..trials).map(f).collect(),
        Execution::Parallel { threads } => parallel_map(trials, threads, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<F>(trials: u64, threads: Option<usize>, f: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(u64) -> Result<TrialRecord> + Sync + Send,
{
    use rayon::prelude::*;
    // indexed collect keeps trial order
    let run = || (0..trials).into_par_iter().map(&f).collect::<Result<Vec<_>>>();
    match threads {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<F>(trials: u64, _threads: Option<usize>, f: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(u64) -> Result<TrialRecord> + Sync + Send,
{
    (0..trials).map(f).collect()
}

/// Runs every trial of `cfg` and returns the records in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let strategy = cfg.validate()?;
    let options = SessionOptions {
        record_trace: false,
        max_total_samples: cfg.max_total_samples,
    };
    let (spec, seed) = (cfg.spec, cfg.base_seed);
    map_trials(cfg.trials, cfg.execution, move |i| {
        let out = run_trial(&strategy, &spec, seed, i, options)?;
        Ok(TrialRecord::from((i, &out)))
    })
}

/// Aggregated statistics of one batch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialBatchResult {
    pub strategy: String,
    pub family: String,
    pub alpha: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub delta: f64,
    pub trials: u64,
    pub success_count: u64,
    pub light_error_count: u64,
    pub null_count: u64,
    pub budget_count: u64,
    pub mean_t: f64,
    pub stddev_t: f64,
    pub mean_n: f64,
    /// Wilson 95% radii.
    pub ci_success: f64,
    pub ci_light_error: f64,
    pub ci_null: f64,
    pub base_seed: u64,
}

impl TrialBatchResult {
    pub fn success_rate(&self) -> f64 {
        self.success_count as f64 / self.trials as f64
    }

    pub fn light_error_rate(&self) -> f64 {
        self.light_error_count as f64 / self.trials as f64
    }

    pub fn null_rate(&self) -> f64 {
        self.null_count as f64 / self.trials as f64
    }

    pub fn budget_rate(&self) -> f64 {
        self.budget_count as f64 / self.trials as f64
    }
}

/// Sequential, order-fixed aggregation of trial records.
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> TrialBatchResult {
    let n = records.len() as u64;
    let mut counts = [0u64; 4];
    for r in records {
        let slot = match (r.termination, r.correct) {
            (Termination::DeclaredHeavy, Some(true)) => 0,
            (Termination::DeclaredHeavy, _) => 1,
            (Termination::DeclaredNull, _) => 2,
            (Termination::BudgetExhausted, _) => 3,
        };
        counts[slot] += 1;
    }
    let nf = n as f64;
    let mean_t = records.iter().map(|r| r.total_samples as f64).sum::<f64>() / nf;
    let mean_n = records.iter().map(|r| r.arms_drawn as f64).sum::<f64>() / nf;
    let stddev_t = if n > 1 {
        (records
            .iter()
            .map(|r| (r.total_samples as f64 - mean_t).powi(2))
            .sum::<f64>()
            / (nf - 1.0))
            .sqrt()
    } else {
        0.0
    };
    TrialBatchResult {
        strategy: cfg.strategy.name().to_string(),
        family: cfg.spec.family().label(),
        alpha: cfg.spec.alpha(),
        theta0: cfg.spec.theta0(),
        theta1: cfg.spec.theta1(),
        delta: cfg.strategy.delta(),
        trials: n,
        success_count: counts[0],
        light_error_count: counts[1],
        null_count: counts[2],
        budget_count: counts[3],
        mean_t,
        stddev_t,
        mean_n,
        ci_success: wilson_radius(counts[0], n, Z_95),
        ci_light_error: wilson_radius(counts[1], n, Z_95),
        ci_null: wilson_radius(counts[2], n, Z_95),
        base_seed: cfg.base_seed,
    }
}

/// Runs the batch and, if `cfg.output` is set, writes it as a one-row CSV.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<TrialBatchResult> {
    let records = run_trials(cfg)?;
    let result = aggregate(cfg, &records);
    if let Some(path) = &cfg.output {
        let file = std::fs::File::create(path)?;
        write_csv(std::slice::from_ref(&result), file)?;
    }
    Ok(result)
}
