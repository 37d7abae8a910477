//! Grid runs over `(alpha, epsilon, strategy)` with CSV output.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArmFamily, MixtureSpec};

use super::{run_batch, Execution, ExperimentConfig, StrategyConfig, TrialBatchResult};

pub const CSV_HEADER: [&str; 16] = [
    "strategy",
    "family",
    "alpha",
    "theta0",
    "theta1",
    "delta",
    "trials",
    "success_rate",
    "light_error_rate",
    "null_rate",
    "budget_rate",
    "mean_T",
    "stddev_T",
    "mean_N",
    "ci_success",
    "base_seed",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    strategy: &'a str,
    family: &'a str,
    alpha: f64,
    theta0: f64,
    theta1: f64,
    delta: f64,
    trials: u64,
    success_rate: f64,
    light_error_rate: f64,
    null_rate: f64,
    budget_rate: f64,
    #[serde(rename = "mean_T")]
    mean_t: f64,
    #[serde(rename = "stddev_T")]
    stddev_t: f64,
    #[serde(rename = "mean_N")]
    mean_n: f64,
    ci_success: f64,
    base_seed: u64,
}

impl<'a> From<&'a TrialBatchResult> for CsvRow<'a> {
    fn from(r: &'a TrialBatchResult) -> Self {
        Self {
            strategy: &r.strategy,
            family: &r.family,
            alpha: r.alpha,
            theta0: r.theta0,
            theta1: r.theta1,
            delta: r.delta,
            trials: r.trials,
            success_rate: r.success_rate(),
            light_error_rate: r.light_error_rate(),
            null_rate: r.null_rate(),
            budget_rate: r.budget_rate(),
            mean_t: r.mean_t,
            stddev_t: r.stddev_t,
            mean_n: r.mean_n,
            ci_success: r.ci_success,
            base_seed: r.base_seed,
        }
    }
}

/// Writes a header and one row per result.
pub fn write_csv<W: Write>(results: &[TrialBatchResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if results.is_empty() {
        out.write_record(CSV_HEADER)?;
    }
    for r in results {
        out.serialize(CsvRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}

/// Grid of instances: each `(alpha, epsilon)` point becomes
/// `theta0 = centre - epsilon/2`, `theta1 = centre + epsilon/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub points: Vec<(f64, f64)>,
    pub strategies: Vec<StrategyConfig>,
    pub family: ArmFamily,
    pub centre: f64,
    pub trials: u64,
    pub base_seed: u64,
    pub max_total_samples: u64,
    pub execution: Execution,
}

impl SweepGrid {
    /// Every combination of the given alphas and epsilons.
    pub fn cartesian(alphas: &[f64], epsilons: &[f64]) -> Vec<(f64, f64)> {
        alphas
            .iter()
            .flat_map(|&a| epsilons.iter().map(move |&e| (a, e)))
            .collect()
    }

    fn spec_at(&self, alpha: f64, epsilon: f64) -> Result<MixtureSpec> {
        MixtureSpec::new(
            alpha,
            self.centre - 0.5 * epsilon,
            self.centre + 0.5 * epsilon,
            self.family,
        )
    }
}

/// One batch per `(strategy, point)`, strategy-major, in grid order.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<TrialBatchResult>> {
    if grid.points.is_empty() || grid.strategies.is_empty() {
        return Err(Error::invalid("grid", "needs at least one point and one strategy"));
    }
    let mut rows = Vec::with_capacity(grid.points.len() * grid.strategies.len());
    for strategy in &grid.strategies {
        for &(alpha, epsilon) in &grid.points {
            let cfg = ExperimentConfig {
                max_total_samples: grid.max_total_samples,
                execution: grid.execution,
                ..ExperimentConfig::new(grid.spec_at(alpha, epsilon)?, *strategy, grid.trials, grid.base_seed)
            };
            rows.push(run_batch(&cfg)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(points: Vec<(f64, f64)>) -> SweepGrid {
        SweepGrid {
            points,
            strategies: vec![StrategyConfig::by_name("fixed_sample", 0.1).unwrap()],
            family: ArmFamily::Bernoulli,
            centre: 0.5,
            trials: 20,
            base_seed: 11,
            max_total_samples: 1_000_000,
            execution: Execution::default(),
        }
    }

    #[test]
    fn one_point_one_row() {
        let rows = sweep(&grid(vec![(0.2, 0.3)])).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].theta0 - 0.35).abs() < 1e-15);
    }

    #[test]
    fn csv_is_byte_stable_with_exact_header() {
        let g = grid(SweepGrid::cartesian(&[0.2, 0.3], &[0.3, 0.4]));
        let render = || {
            let mut buf = Vec::new();
            write_csv(&sweep(&g).unwrap(), &mut buf).unwrap();
            buf
        };
        let a = render();
        assert_eq!(a, render());
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn empty_results_still_have_header() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER.join(","));
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(sweep(&grid(vec![])).is_err());
    }
}
