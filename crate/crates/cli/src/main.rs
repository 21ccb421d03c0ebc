//! Command-line front end: instance generation, the message-passing run,
//! metric-optimal estimation, limit/ROC tables, full experiment sweeps,
//! and plotting from aggregate tables.
//!
//! Exit codes: 0 success, 1 invalid arguments or spec, 2 runtime failure.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csmet::harness::{run_roc_sweep, AggregateRow};
use csmet::{
    emit_plot, run_experiment, run_gamp, run_scalar_channel_direct, CosampConfig, ErrorMetric,
    ExperimentSpec, GampConfig, LimitQuery, OutputChannel, PlotSpec, ProblemInstance, Scenario,
    Series, SignalPrior,
};

#[derive(Parser)]
#[command(name = "csmet", about = "Compressed-sensing metric-optimal estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded problem instance and write it to a text file.
    Generate(GenerateArgs),
    /// Run the message-passing decoupler on an instance file.
    Gamp(GampArgs),
    /// Compute a metric-optimal estimate from a decoupler result.
    Estimate(EstimateArgs),
    /// Print a limit value for a metric at a given scalar-channel noise.
    Limit(LimitArgs),
    /// Print a (beta, fpr, fnr, tpr) ROC table at a given noise level.
    Roc(RocArgs),
    /// Run a full experiment sweep and write CSV/SVG artifacts.
    Experiment(ExperimentArgs),
    /// Re-plot metric curves from an existing aggregate.csv.
    Plot(PlotArgs),
}

#[derive(Args)]
struct PriorArgs {
    /// Probability that a component is nonzero.
    #[arg(long, default_value_t = 0.03)]
    sparsity: f64,
    /// Slab family: gaussian or weibull.
    #[arg(long, default_value = "gaussian")]
    slab: String,
    /// Gaussian slab variance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Weibull scale.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Weibull shape.
    #[arg(long, default_value_t = 0.5)]
    shape: f64,
}

impl PriorArgs {
    fn build(&self) -> csmet::Result<SignalPrior> {
        match self.slab.as_str() {
            "gaussian" => SignalPrior::sparse_gaussian(self.sparsity, self.sigma2),
            "weibull" => SignalPrior::sparse_weibull(self.sparsity, self.lambda, self.shape),
            other => Err(csmet::Error::InvalidParameter(format!(
                "unknown slab {other:?}; expected gaussian or weibull"
            ))),
        }
    }
}

#[derive(Args)]
struct MetricArgs {
    /// Metric: squared, absolute, power, support, or wsupport.
    #[arg(long)]
    metric: String,
    /// Exponent for the power metric.
    #[arg(long, default_value_t = 0.5)]
    power: f64,
    /// False-positive weight for the weighted-support metric.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
}

impl MetricArgs {
    fn build(&self) -> csmet::Result<ErrorMetric> {
        parse_metric(&self.metric, self.power, self.beta)
    }
}

fn parse_metric(name: &str, power: f64, beta: f64) -> csmet::Result<ErrorMetric> {
    let metric = match name {
        "squared" => ErrorMetric::Squared,
        "absolute" => ErrorMetric::Absolute,
        "power" => ErrorMetric::Power(power),
        "support" => ErrorMetric::Support,
        "wsupport" => ErrorMetric::WeightedSupport(beta),
        other => {
            // compact sweep syntax: power_0.5, wsupport_0.3
            if let Some(p) = other.strip_prefix("power_") {
                ErrorMetric::Power(p.parse().map_err(|_| {
                    csmet::Error::Parse(format!("bad power exponent in {other:?}"))
                })?)
            } else if let Some(b) = other.strip_prefix("wsupport_") {
                ErrorMetric::WeightedSupport(b.parse().map_err(|_| {
                    csmet::Error::Parse(format!("bad weight in {other:?}"))
                })?)
            } else {
                return Err(csmet::Error::InvalidParameter(format!(
                    "unknown metric {other:?}"
                )));
            }
        }
    };
    metric.validate()?;
    Ok(metric)
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Channel: awgn or poisson.
    #[arg(long, default_value = "awgn")]
    channel: String,
    /// AWGN noise variance.
    #[arg(long, default_value_t = 3e-4)]
    noise_variance: f64,
    /// Poisson input scaling factor.
    #[arg(long, default_value_t = 100.0)]
    scaling: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output instance file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GampArgs {
    /// Instance file produced by `generate`.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 20)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
    /// Output scalar-channel result CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Instance file (supplies the prior).
    #[arg(long)]
    instance: PathBuf,
    /// Scalar-channel result CSV from `gamp`.
    #[arg(long)]
    gamp_result: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Output estimate CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LimitArgs {
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    metric: MetricArgs,
    /// Scalar-channel noise variance.
    #[arg(long)]
    mu: f64,
    /// Signal dimension the limit scales to.
    #[arg(long, default_value_t = 1)]
    n: usize,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long, default_value_t = 0.03)]
    sparsity: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Scalar-channel noise variance.
    #[arg(long)]
    mu: f64,
    /// Number of beta points swept uniformly over (0, 1), endpoints included.
    #[arg(long, default_value_t = 25)]
    points: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key = value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian_awgn, weibull_poisson, or scalar_channel_direct.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated measurement ratios, e.g. 0.2,0.3,0.4.
    #[arg(long)]
    ratios: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated metric names (squared, absolute, power_0.5,
    /// support, wsupport_0.3, ...).
    #[arg(long)]
    metrics: Option<String>,
    /// Comma-separated beta values for ROC sweeps.
    #[arg(long)]
    betas: Option<String>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Run CoSaMP with this sparsity budget (AWGN scenarios only).
    #[arg(long)]
    cosamp_k: Option<usize>,
    /// Also trace the limit ROC curves per ratio (needs --betas).
    #[arg(long, default_value_t = false)]
    roc: bool,
    /// Scalar-channel noise for the scalar_channel_direct scenario.
    #[arg(long)]
    mu: Option<f64>,
    /// Sample count for the scalar_channel_direct scenario.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// aggregate.csv produced by `experiment`.
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving one SVG per metric.
    #[arg(long)]
    output_dir: PathBuf,
    /// Use a log-scale y axis.
    #[arg(long, default_value_t = false)]
    log_y: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                csmet::Error::InvalidParameter(_)
                | csmet::Error::DimensionMismatch(_)
                | csmet::Error::Parse(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> csmet::Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let prior = args.prior.build()?;
            let channel = match args.channel.as_str() {
                "awgn" => OutputChannel::Awgn {
                    noise_variance: args.noise_variance,
                },
                "poisson" => OutputChannel::Poisson {
                    scaling: args.scaling,
                },
                other => {
                    return Err(csmet::Error::InvalidParameter(format!(
                        "unknown channel {other:?}; expected awgn or poisson"
                    )))
                }
            };
            let instance = ProblemInstance::generate(prior, channel, args.n, args.m, args.seed)?;
            csmet::io::write_instance(&args.out, &instance)?;
            println!("wrote instance to {}", args.out.display());
            Ok(())
        }
        Command::Gamp(args) => {
            let instance = csmet::io::read_instance(&args.instance)?;
            let config = GampConfig {
                max_iterations: args.max_iterations,
                damping: args.damping,
                ..GampConfig::default()
            };
            let result = run_gamp(&instance, &config)?;
            csmet::io::write_scalar_result(&args.out, &result)?;
            println!(
                "mu = {}, iterations = {}, wrote {}",
                result.mu,
                result.iterations_run,
                args.out.display()
            );
            Ok(())
        }
        Command::Estimate(args) => {
            let instance = csmet::io::read_instance(&args.instance)?;
            let result = csmet::io::read_scalar_result(&args.gamp_result)?;
            let metric = args.metric.build()?;
            let estimate =
                csmet::estimate_metric_optimal(&metric, &instance.prior, &result.q, result.mu)?;
            let error = csmet::evaluate_error(&metric, &estimate, &instance.x)?;
            csmet::io::write_estimate(&args.out, &estimate)?;
            println!(
                "metric = {}, total error vs ground truth = {}, wrote {}",
                metric.name(),
                error,
                args.out.display()
            );
            Ok(())
        }
        Command::Limit(args) => {
            let prior = args.prior.build()?;
            let metric = args.metric.build()?;
            let beta = match metric {
                ErrorMetric::WeightedSupport(b) => Some(b),
                _ => None,
            };
            let query = LimitQuery {
                prior,
                mu: args.mu,
                n: args.n,
                metric: metric.clone(),
                beta,
            };
            let value = query.evaluate()?;
            println!("metric,mu,n,limit");
            println!("{},{},{},{}", metric.name(), args.mu, args.n, value);
            Ok(())
        }
        Command::Roc(args) => {
            if args.points < 2 {
                return Err(csmet::Error::InvalidParameter(
                    "need at least 2 beta points".into(),
                ));
            }
            println!("beta,fpr,fnr,tpr");
            for i in 0..args.points {
                let beta = i as f64 / (args.points - 1) as f64;
                let (fpr, fnr) = csmet::roc_point(args.sparsity, args.sigma2, args.mu, beta)?;
                println!("{beta},{fpr},{fnr},{}", 1.0 - fnr);
            }
            Ok(())
        }
        Command::Experiment(args) => run_experiment_command(args),
        Command::Plot(args) => plot_from_aggregate(&args),
    }
}

/// Flat key = value config file; '#' starts a comment.
fn load_config(path: &PathBuf) -> csmet::Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            csmet::Error::Parse(format!(
                "{}:{}: expected key = value, got {raw:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> csmet::Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| csmet::Error::Parse(format!("bad {what} entry {t:?}")))
        })
        .collect()
}

fn run_experiment_command(args: ExperimentArgs) -> csmet::Result<()> {
    let config = match &args.config {
        Some(path) => load_config(path)?,
        None => HashMap::new(),
    };
    let pick_str = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| config.get(key).cloned())
    };
    let scenario_name = pick_str(&args.scenario, "scenario")
        .ok_or_else(|| csmet::Error::InvalidParameter("a scenario is required".into()))?;
    let scenario = Scenario::parse(&scenario_name)?;
    let output_dir = args
        .output_dir
        .clone()
        .or_else(|| config.get("output_dir").map(PathBuf::from))
        .ok_or_else(|| csmet::Error::InvalidParameter("an output_dir is required".into()))?;

    let parse_cfg = |key: &str| -> Option<&String> { config.get(key) };

    if scenario == Scenario::ScalarChannelDirect {
        let mu = args
            .mu
            .or_else(|| parse_cfg("mu").and_then(|v| v.parse().ok()))
            .ok_or_else(|| csmet::Error::InvalidParameter("scalar_channel_direct needs --mu".into()))?;
        let samples = args
            .samples
            .or_else(|| parse_cfg("samples").and_then(|v| v.parse().ok()))
            .unwrap_or(1_000_000);
        let seed = args
            .base_seed
            .or_else(|| parse_cfg("base_seed").and_then(|v| v.parse().ok()))
            .unwrap_or(1);
        let metric_names = pick_str(&args.metrics, "metrics")
            .unwrap_or_else(|| "absolute,support,wsupport_0.3".into());
        let metrics: Vec<ErrorMetric> = metric_names
            .split(',')
            .map(|m| parse_metric(m.trim(), 0.5, 0.5))
            .collect::<csmet::Result<_>>()?;
        let prior = scenario.prior()?;
        let rows = run_scalar_channel_direct(&prior, mu, samples, &metrics, seed)?;
        std::fs::create_dir_all(&output_dir)?;
        let mut csv = String::from(
            "metric,empirical,std_error,limit,fpr_empirical,fpr_theory,fnr_empirical,fnr_theory\n",
        );
        for r in &rows {
            let (fe, ft, ne, nt) = match &r.rates {
                Some(x) => (
                    x.fpr_empirical.to_string(),
                    x.fpr_theory.to_string(),
                    x.fnr_empirical.to_string(),
                    x.fnr_theory.to_string(),
                ),
                None => (String::new(), String::new(), String::new(), String::new()),
            };
            csv.push_str(&format!(
                "{},{},{},{},{fe},{ft},{ne},{nt}\n",
                r.metric, r.empirical, r.std_error, r.limit
            ));
        }
        std::fs::write(output_dir.join("direct.csv"), &csv)?;
        print!("{csv}");
        return Ok(());
    }

    let mut spec = ExperimentSpec::desk_scale(scenario, output_dir);
    if let Some(n) = args.n.or_else(|| parse_cfg("n").and_then(|v| v.parse().ok())) {
        spec.n = n;
    }
    if let Some(r) = pick_str(&args.ratios, "ratios") {
        spec.m_over_n_sweep = parse_list(&r, "ratio")?;
    }
    if let Some(t) = args
        .trials
        .or_else(|| parse_cfg("trials").and_then(|v| v.parse().ok()))
    {
        spec.trials = t;
    }
    if let Some(m) = pick_str(&args.metrics, "metrics") {
        spec.metrics = m
            .split(',')
            .map(|t| parse_metric(t.trim(), 0.5, 0.5))
            .collect::<csmet::Result<_>>()?;
    }
    if let Some(b) = pick_str(&args.betas, "betas") {
        spec.beta_sweep = Some(parse_list(&b, "beta")?);
    }
    if let Some(s) = args
        .base_seed
        .or_else(|| parse_cfg("base_seed").and_then(|v| v.parse().ok()))
    {
        spec.base_seed = s;
    }
    if let Some(k) = args
        .cosamp_k
        .or_else(|| parse_cfg("cosamp_k").and_then(|v| v.parse().ok()))
    {
        spec.cosamp = Some(CosampConfig::new(k));
    }

    let want_roc = args.roc || parse_cfg("roc").map(|v| v == "true").unwrap_or(false);
    if want_roc {
        let records = run_roc_sweep(&spec)?;
        println!(
            "wrote {} ROC rows to {}",
            records.len(),
            spec.output_dir.join("roc.csv").display()
        );
        return Ok(());
    }

    let out = run_experiment(&spec)?;
    println!(
        "{} records, {} aggregate rows, {} trials diverged; artifacts in {}",
        out.records.len(),
        out.aggregates.len(),
        out.diagnostics.iter().filter(|d| d.diverged).count(),
        spec.output_dir.display()
    );
    Ok(())
}

fn plot_from_aggregate(args: &PlotArgs) -> csmet::Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let mut rows: Vec<AggregateRow> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(csmet::Error::Parse(format!(
                "aggregate.csv line {} has {} fields, expected 11",
                i + 1,
                f.len()
            )));
        }
        let num = |s: &str| -> csmet::Result<f64> {
            s.parse()
                .map_err(|_| csmet::Error::Parse(format!("bad number {s:?}")))
        };
        rows.push(AggregateRow {
            scenario: f[0].into(),
            n: num(f[1])? as usize,
            ratio: num(f[2])?,
            m: num(f[3])? as usize,
            estimator: f[4].into(),
            metric: f[5].into(),
            trials_used: num(f[6])? as usize,
            diverged_trials: num(f[7])? as usize,
            mean_error: num(f[8])?,
            std_error: num(f[9])?,
            mean_mu: num(f[10])?,
        });
    }
    if rows.is_empty() {
        return Err(csmet::Error::InvalidParameter(
            "the aggregate table has no data rows".into(),
        ));
    }
    std::fs::create_dir_all(&args.output_dir)?;
    let mut by_metric: std::collections::BTreeMap<String, std::collections::BTreeMap<String, Vec<(f64, f64)>>> =
        Default::default();
    for r in &rows {
        by_metric
            .entry(r.metric.clone())
            .or_default()
            .entry(r.estimator.clone())
            .or_default()
            .push((r.ratio, r.mean_error));
    }
    for (metric, estimators) in by_metric {
        let series: Vec<Series> = estimators
            .into_iter()
            .map(|(name, mut points)| {
                points.sort_by(|a, b| a.partial_cmp(b).unwrap());
                Series { name, points }
            })
            .collect();
        let svg = emit_plot(
            &PlotSpec {
                title: format!("{} / {}", rows[0].scenario, metric),
                x_label: "M/N".into(),
                y_label: format!("mean {metric} error"),
                log_y: args.log_y,
            },
            &series,
        )?;
        let path = args.output_dir.join(format!("metric_{metric}.svg"));
        std::fs::write(&path, svg)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
