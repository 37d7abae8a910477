use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coinbag::bag::{write_trace_jsonl, SessionOptions, DEFAULT_MAX_TOTAL_SAMPLES};
use coinbag::bounds::all_bounds;
use coinbag::detect::{plan_gaussian_test, run_gaussian_test, simulate_detection};
use coinbag::divergence::{
    chi2, chi2_mixture_vs_single, chi2_product, kl, mixture_bound_constants, DivergenceValue,
};
use coinbag::harness::{
    probe_linear_crossing, run_batch, run_trial, sweep, write_csv, Execution, ExperimentConfig,
    StrategyConfig, SweepGrid, WalkIncrement,
};
use coinbag::{ArmFamily, Error, MixtureSpec, Result};

#[derive(Parser)]
#[command(name = "coinbag", version, about = "Find a heavy coin in a bag of light ones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one batch of trials and print a one-row CSV.
    Simulate(SimulateArgs),
    /// Run a grid of (alpha, epsilon) points and print one CSV row per point.
    Sweep(SweepArgs),
    /// Evaluate every closed-form bound at one instance (JSON lines).
    Bounds(BoundsArgs),
    /// KL and chi-squared divergences (JSON).
    Divergence(DivergenceArgs),
    /// Plan or run the threshold test for a Gaussian mixture.
    Detect(DetectArgs),
    /// Monte Carlo probability that a random walk crosses a line.
    ProbeLemma(ProbeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Bernoulli,
    Gaussian,
    Beta,
}

#[derive(Args, Clone)]
struct FamilyArgs {
    #[arg(long, value_enum, default_value = "bernoulli")]
    family: FamilyName,
    /// Standard deviation of Gaussian arms.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Concentration `a + b` of Beta arms.
    #[arg(long, default_value_t = 10.0)]
    concentration: f64,
}

impl FamilyArgs {
    fn family(&self) -> Result<ArmFamily> {
        let f = match self.family {
            FamilyName::Bernoulli => ArmFamily::Bernoulli,
            FamilyName::Gaussian => ArmFamily::Gaussian { sigma: self.sigma },
            FamilyName::Beta => ArmFamily::BoundedBeta {
                concentration: self.concentration,
            },
        };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-trial sample budget.
    #[arg(long = "max-samples", default_value_t = DEFAULT_MAX_TOTAL_SAMPLES)]
    max_samples: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Run trials on the calling thread only.
    #[arg(long, conflicts_with = "threads")]
    sequential: bool,
    /// CSV output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel {
                threads: (self.threads > 0).then_some(self.threads),
            }
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON or TOML file holding an experiment config; replaces the problem flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    theta0: f64,
    #[arg(long, default_value_t = 0.7)]
    theta1: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value = "fixed_sample")]
    strategy: String,
    /// Heavy-fraction guess of the SPRT strategy (defaults to the true alpha).
    #[arg(long)]
    alpha0: Option<f64>,
    /// Gap guess of the SPRT strategy (defaults to the true gap).
    #[arg(long)]
    epsilon0: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
    /// Write the event trace of one trial as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Trial whose trace is written.
    #[arg(long = "trace-trial", default_value_t = 0, requires = "trace")]
    trace_trial: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    epsilons: Vec<f64>,
    /// Midpoint of the two means; arms have means `centre -+ epsilon/2`.
    #[arg(long, default_value_t = 0.5)]
    centre: f64,
    #[arg(long, value_delimiter = ',', default_value = "fully_adaptive")]
    strategies: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    theta0: f64,
    #[arg(long)]
    theta1: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Samples per arm for the fixed-m bounds.
    #[arg(long, default_value_t = 1)]
    m: u32,
}

#[derive(Args)]
struct DivergenceArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Mean of the first argument.
    #[arg(long)]
    p: f64,
    /// Mean of the second argument.
    #[arg(long)]
    q: f64,
    /// Also report the divergence between `m`-fold products.
    #[arg(long)]
    m: Option<u32>,
    /// Also compare the mixture `(1 - alpha) g(p) + alpha g(q)` of `m`-sample
    /// laws against a single reference law.
    #[arg(long, requires = "m")]
    mixture_alpha: Option<f64>,
    /// Reference mean for the mixture comparison (defaults to the worst case).
    #[arg(long, requires = "mixture_alpha")]
    reference: Option<f64>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, default_value_t = 0.0)]
    theta0: f64,
    #[arg(long, default_value_t = 1.0)]
    theta1: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Newline-separated samples; every block of `n` yields one decision.
    #[arg(long, conflicts_with = "simulate")]
    samples: Option<PathBuf>,
    /// Estimate both error rates from this many simulated runs per hypothesis.
    #[arg(long)]
    simulate: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum WalkName {
    Rademacher,
    Uniform,
    Zero,
}

#[derive(Args)]
struct ProbeArgs {
    /// Slope of the line.
    #[arg(long)]
    slope: f64,
    /// Intercept of the line.
    #[arg(long)]
    offset: f64,
    #[arg(long, value_enum, default_value = "rademacher")]
    walk: WalkName,
    /// Steps per walk (defaults to the smallest admissible horizon).
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Bounds(a) => bounds(a),
        Command::Divergence(a) => divergence(a),
        Command::Detect(a) => detect(a),
        Command::ProbeLemma(a) => probe(a),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| Error::Config(e.to_string())),
        _ => serde_json::from_str(&text).map_err(Error::from),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(path) => {
            let mut cfg = load_config(path)?;
            if a.run.out.is_some() {
                cfg.output = a.run.out.clone();
            }
            cfg
        }
        None => {
            let spec = MixtureSpec::new(a.alpha, a.theta0, a.theta1, a.family.family()?)?;
            let mut strategy = StrategyConfig::by_name(&a.strategy, a.delta)?;
            if let StrategyConfig::AdaptiveSprt {
                alpha0, epsilon0, ..
            } = &mut strategy
            {
                *alpha0 = a.alpha0;
                *epsilon0 = a.epsilon0;
            } else if a.alpha0.is_some() || a.epsilon0.is_some() {
                return Err(Error::invalid(
                    "alpha0",
                    "--alpha0 and --epsilon0 only apply to adaptive_sprt",
                ));
            }
            let mut cfg = ExperimentConfig::new(spec, strategy, a.run.trials, a.run.seed);
            cfg.max_total_samples = a.run.max_samples;
            cfg.output = a.run.out.clone();
            cfg
        }
    }
    .with_execution(a.run.execution());

    let result = run_batch(&cfg)?;
    if cfg.output.is_none() {
        write_csv(std::slice::from_ref(&result), io::stdout().lock())?;
    }
    if let Some(path) = &a.trace {
        if a.trace_trial >= cfg.trials {
            return Err(Error::invalid(
                "trace-trial",
                format!("must be below trials ({})", cfg.trials),
            ));
        }
        let options = SessionOptions {
            record_trace: true,
            max_total_samples: cfg.max_total_samples,
        };
        let strategy = cfg.strategy.resolve(&cfg.spec)?;
        let out = run_trial(&strategy, &cfg.spec, cfg.base_seed, a.trace_trial, options)?;
        let mut w = BufWriter::new(File::create(path)?);
        write_trace_jsonl(&out.trace, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let strategies = a
        .strategies
        .iter()
        .map(|s| StrategyConfig::by_name(s, a.delta))
        .collect::<Result<Vec<_>>>()?;
    let grid = SweepGrid {
        points: SweepGrid::cartesian(&a.alphas, &a.epsilons),
        strategies,
        family: a.family.family()?,
        centre: a.centre,
        trials: a.run.trials,
        base_seed: a.run.seed,
        max_total_samples: a.run.max_samples,
        execution: a.run.execution(),
    };
    let rows = sweep(&grid)?;
    match &a.run.out {
        Some(path) => write_csv(&rows, File::create(path)?),
        None => write_csv(&rows, io::stdout().lock()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let reports = all_bounds(a.alpha, a.delta, a.family.family()?, a.theta0, a.theta1, a.m)?;
    for r in &reports {
        print_json(r)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DivergenceReport {
    family: ArmFamily,
    p: f64,
    q: f64,
    kl: DivergenceValue,
    chi2: DivergenceValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi2_product: Option<DivergenceValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mixture: Option<MixtureReport>,
}

#[derive(Serialize)]
struct MixtureReport {
    alpha: f64,
    reference: f64,
    theta_star: f64,
    chi2: DivergenceValue,
    bound: f64,
}

fn divergence(a: DivergenceArgs) -> Result<()> {
    let family = a.family.family()?;
    let chi2_product = a.m.map(|m| chi2_product(family, a.p, a.q, m)).transpose()?;
    let mixture = match (a.mixture_alpha, a.m) {
        (Some(alpha), Some(m)) => {
            let spec = MixtureSpec::new(alpha, a.p, a.q, family)?;
            let constants = mixture_bound_constants(&spec, m)?;
            let reference = a.reference.unwrap_or(constants.theta_star);
            Some(MixtureReport {
                alpha,
                reference,
                theta_star: constants.theta_star,
                chi2: chi2_mixture_vs_single(&spec, m, reference)?,
                bound: constants.chi2_bound(alpha),
            })
        }
        _ => None,
    };
    print_json(&DivergenceReport {
        family,
        p: a.p,
        q: a.q,
        kl: kl(family, a.p, a.q)?,
        chi2: chi2(family, a.p, a.q)?,
        m: a.m,
        chi2_product,
        mixture,
    })
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut xs = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        xs.push(t.parse().map_err(|_| {
            Error::invalid("samples", format!("line {}: `{t}` is not a number", i + 1))
        })?);
    }
    Ok(xs)
}

fn detect(a: DetectArgs) -> Result<()> {
    let plan = plan_gaussian_test(a.theta0, a.theta1, a.sigma, a.alpha, a.delta)?;
    print_json(&plan)?;
    if let Some(path) = &a.samples {
        let xs = read_samples(path)?;
        if xs.is_empty() || !(xs.len() as u64).is_multiple_of(plan.n) {
            return Err(Error::SampleCount {
                expected: plan.n as usize,
                got: xs.len(),
            });
        }
        for chunk in xs.chunks(plan.n as usize) {
            print_json(&serde_json::json!({ "decision": run_gaussian_test(&plan, chunk)? }))?;
        }
    }
    if let Some(trials) = a.simulate {
        print_json(&simulate_detection(&plan, trials, a.seed)?)?;
    }
    Ok(())
}

fn probe(a: ProbeArgs) -> Result<()> {
    let walk = match a.walk {
        WalkName::Rademacher => WalkIncrement::Rademacher,
        WalkName::Uniform => WalkIncrement::UniformCentered,
        WalkName::Zero => WalkIncrement::Zero,
    };
    print_json(&probe_linear_crossing(a.slope, a.offset, walk, a.horizon, a.trials, a.seed)?)
}
