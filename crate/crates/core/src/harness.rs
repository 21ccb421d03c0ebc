//! Experiment harness: seeded instance ensembles swept over measurement
//! ratios, all estimators and limit formulas evaluated per trial, results
//! aggregated and written as CSV tables plus SVG line plots.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cosamp::{cosamp_for_instance, CosampConfig};
use crate::error::{Error, Result};
use crate::gamp::{run_gamp, GampConfig};
use crate::limits::{mmae_limit, mmsue_limit, mmwse_limit, roc_point, LimitQuery};
use crate::metric::{
    estimate_metric_optimal, evaluate_error, ErrorMetric,
};
use crate::model::{mix_seed, rng_from_seed, OutputChannel, ProblemInstance, SignalPrior, Slab};
use crate::plot::{emit_plot, PlotSpec, Series};

/// Preset experiment scenarios matching the two simulated systems plus
/// the matrix-free scalar-channel validation path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    GaussianAwgn,
    WeibullPoisson,
    ScalarChannelDirect,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian_awgn" => Ok(Scenario::GaussianAwgn),
            "weibull_poisson" => Ok(Scenario::WeibullPoisson),
            "scalar_channel_direct" => Ok(Scenario::ScalarChannelDirect),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario {other:?}; expected gaussian_awgn, weibull_poisson, \
                 or scalar_channel_direct"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::GaussianAwgn => "gaussian_awgn",
            Scenario::WeibullPoisson => "weibull_poisson",
            Scenario::ScalarChannelDirect => "scalar_channel_direct",
        }
    }

    /// Default prior of the preset: 3% sparsity, unit-variance Gaussian
    /// slab or Weibull(λ=1, k=0.5) slab.
    pub fn prior(self) -> Result<SignalPrior> {
        match self {
            Scenario::GaussianAwgn | Scenario::ScalarChannelDirect => {
                SignalPrior::sparse_gaussian(0.03, 1.0)
            }
            Scenario::WeibullPoisson => SignalPrior::sparse_weibull(0.03, 1.0, 0.5),
        }
    }

    /// Default channel of the preset: AWGN at 20 dB SNR for the Gaussian
    /// system, Poisson with scaling 100 for the Weibull system.
    pub fn channel(self) -> Result<OutputChannel> {
        match self {
            Scenario::GaussianAwgn => Ok(OutputChannel::Awgn {
                noise_variance: 3e-4,
            }),
            Scenario::WeibullPoisson => Ok(OutputChannel::Poisson { scaling: 100.0 }),
            Scenario::ScalarChannelDirect => Err(Error::InvalidParameter(
                "scalar_channel_direct has no measurement channel".into(),
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub m_over_n_sweep: Vec<f64>,
    pub trials: usize,
    pub metrics: Vec<ErrorMetric>,
    pub beta_sweep: Option<Vec<f64>>,
    pub base_seed: u64,
    pub gamp: GampConfig,
    /// When set, CoSaMP runs on every AWGN trial with this configuration.
    pub cosamp: Option<CosampConfig>,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    /// Desk-scale defaults: N=2000, 20 trials.
    pub fn desk_scale(scenario: Scenario, output_dir: PathBuf) -> Self {
        ExperimentSpec {
            scenario,
            n: 2000,
            m_over_n_sweep: vec![0.2, 0.3, 0.4, 0.5],
            trials: 20,
            metrics: vec![ErrorMetric::Absolute],
            beta_sweep: None,
            base_seed: 1,
            // zero/one matrices converge slowly (often only under heavy
            // damping), so the experiment budget is well above the
            // single-run default
            gamp: GampConfig {
                max_iterations: 300,
                ..GampConfig::default()
            },
            cosamp: None,
            output_dir,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario == Scenario::ScalarChannelDirect {
            return Err(Error::InvalidParameter(
                "scalar_channel_direct runs through run_scalar_channel_direct, not the \
                 matrix experiment loop"
                    .into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be positive".into()));
        }
        if self.m_over_n_sweep.is_empty() {
            return Err(Error::InvalidParameter("the ratio sweep must be nonempty".into()));
        }
        for r in &self.m_over_n_sweep {
            if !(r.is_finite() && *r > 0.0 && *r <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "measurement ratios must lie in (0,1], got {r}"
                )));
            }
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidParameter("the metric list must be nonempty".into()));
        }
        for m in &self.metrics {
            m.validate()?;
        }
        if let Some(betas) = &self.beta_sweep {
            if betas.is_empty() {
                return Err(Error::InvalidParameter("the beta sweep must be nonempty".into()));
            }
        }
        self.gamp.validate()?;
        if let Some(c) = &self.cosamp {
            c.validate(self.n)?;
        }
        Ok(())
    }
}

/// One (estimator, metric) evaluation of one trial.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub scenario: String,
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    pub trial: usize,
    pub seed: u64,
    pub estimator: String,
    pub metric: String,
    pub error: f64,
    pub mu: f64,
}

/// Per-trial GAMP health report; divergent trials appear here and nowhere
/// else.
#[derive(Clone, Debug)]
pub struct TrialDiagnostics {
    pub ratio: f64,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    pub diverged: bool,
    pub iterations: usize,
    pub mu: f64,
    pub floor_hits: usize,
}

#[derive(Clone, Debug)]
pub struct AggregateRow {
    pub scenario: String,
    pub n: usize,
    pub ratio: f64,
    pub m: usize,
    pub estimator: String,
    pub metric: String,
    pub trials_used: usize,
    pub diverged_trials: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_mu: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub diagnostics: Vec<TrialDiagnostics>,
}

/// Documented seed derivation: one SplitMix64 step of the base seed with
/// the ratio and trial indices packed into the stream word, so any single
/// sweep point can be reproduced in isolation.
pub fn derive_seed(base_seed: u64, ratio_index: usize, trial_index: usize) -> u64 {
    mix_seed(
        base_seed,
        ((ratio_index as u64 + 1) << 32) ^ (trial_index as u64 + 1),
    )
}

struct TrialOutcome {
    records: Vec<TrialRecord>,
    diagnostics: TrialDiagnostics,
    wall_ms: f64,
}

fn run_trial(
    spec: &ExperimentSpec,
    prior: SignalPrior,
    channel: OutputChannel,
    ratio_index: usize,
    trial: usize,
) -> Result<TrialOutcome> {
    let started = Instant::now();
    let ratio = spec.m_over_n_sweep[ratio_index];
    let m = ((ratio * spec.n as f64).round() as usize).max(1);
    let seed = derive_seed(spec.base_seed, ratio_index, trial);
    let instance = ProblemInstance::generate(prior, channel, spec.n, m, seed)?;

    let gamp_result = match run_gamp(&instance, &spec.gamp) {
        Ok(r) => r,
        Err(Error::GampDivergence {
            iterations,
            mu_trajectory,
        }) => {
            return Ok(TrialOutcome {
                records: Vec::new(),
                diagnostics: TrialDiagnostics {
                    ratio,
                    m,
                    trial,
                    seed,
                    diverged: true,
                    iterations,
                    mu: *mu_trajectory.last().unwrap_or(&f64::NAN),
                    floor_hits: 0,
                },
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            })
        }
        Err(e) => return Err(e),
    };

    let mut records = Vec::new();
    let mut push = |estimator: &str, metric: &ErrorMetric, error: f64| -> Result<()> {
        if !(error.is_finite() && error >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "trial produced an invalid error value {error} for {estimator}/{}",
                metric.name()
            )));
        }
        records.push(TrialRecord {
            scenario: spec.scenario.name().into(),
            n: spec.n,
            m,
            ratio,
            trial,
            seed,
            estimator: estimator.into(),
            metric: metric.name(),
            error,
            mu: gamp_result.mu,
        });
        Ok(())
    };

    for metric in &spec.metrics {
        // metric-optimal estimate; the squared-error path reuses the GAMP
        // posterior means verbatim so the two records coincide exactly
        let optimal = match metric {
            ErrorMetric::Squared => gamp_result.x_mmse.clone(),
            _ => estimate_metric_optimal(metric, &prior, &gamp_result.q, gamp_result.mu)?,
        };
        push(
            "metric_optimal",
            metric,
            evaluate_error(metric, &optimal, &instance.x)?,
        )?;
        push(
            "posterior_mean",
            metric,
            evaluate_error(metric, &gamp_result.x_mmse, &instance.x)?,
        )?;
        if let Some(limit) = trial_limit(&prior, gamp_result.mu, spec.n, metric)? {
            push("limit", metric, limit)?;
        }
    }

    if let Some(cfg) = &spec.cosamp {
        if matches!(channel, OutputChannel::Awgn { .. }) {
            let out = cosamp_for_instance(&instance, cfg)?;
            for metric in &spec.metrics {
                push(
                    "cosamp",
                    metric,
                    evaluate_error(metric, &out.estimate, &instance.x)?,
                )?;
            }
        }
    }

    Ok(TrialOutcome {
        records,
        diagnostics: TrialDiagnostics {
            ratio,
            m,
            trial,
            seed,
            diverged: false,
            iterations: gamp_result.iterations_run,
            mu: gamp_result.mu,
            floor_hits: gamp_result.floor_hits,
        },
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Limit formula matching the metric at the trial's measured μ, where one
/// exists (Gaussian slab for the support metrics; any slab for absolute
/// error).
fn trial_limit(prior: &SignalPrior, mu: f64, n: usize, metric: &ErrorMetric) -> Result<Option<f64>> {
    match (metric, prior.slab) {
        (ErrorMetric::Absolute, Slab::Gaussian { .. }) => {
            Ok(Some(mmae_limit(prior, mu, n)?))
        }
        (ErrorMetric::Support, Slab::Gaussian { sigma2 }) => {
            Ok(Some(mmsue_limit(prior.sparsity, sigma2, mu, n)?))
        }
        (ErrorMetric::WeightedSupport(beta), Slab::Gaussian { sigma2 }) => {
            Ok(Some(mmwse_limit(prior.sparsity, sigma2, mu, n, *beta)?))
        }
        _ => Ok(None),
    }
}

/// Runs the full sweep, writes `records.csv`, `aggregate.csv`,
/// `diagnostics.csv`, `timings.csv`, and one SVG per metric into the
/// output directory, and returns everything in memory. All CSV outputs
/// are byte-identical across reruns of the same spec; wall times live in
/// their own file so the deterministic artifacts stay diffable.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let prior = spec.scenario.prior()?;
    let channel = spec.scenario.channel()?;
    std::fs::create_dir_all(&spec.output_dir)?;

    let jobs: Vec<(usize, usize)> = (0..spec.m_over_n_sweep.len())
        .flat_map(|ri| (0..spec.trials).map(move |ti| (ri, ti)))
        .collect();
    let outcomes: Vec<Result<TrialOutcome>> = jobs
        .par_iter()
        .map(|&(ri, ti)| run_trial(spec, prior, channel, ri, ti))
        .collect();

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut timings = Vec::new();
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(t) => {
                records.extend(t.records);
                timings.push((t.diagnostics.ratio, t.diagnostics.m, t.diagnostics.trial, t.wall_ms));
                diagnostics.push(t.diagnostics);
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    // diagnostics are written even when a trial failed hard, so partial
    // runs remain inspectable
    write_diagnostics(&spec.output_dir.join("diagnostics.csv"), &diagnostics)?;
    if let Some(e) = first_error {
        return Err(e);
    }

    let aggregates = aggregate(&records, &diagnostics);
    write_records(&spec.output_dir.join("records.csv"), &records)?;
    write_aggregates(&spec.output_dir.join("aggregate.csv"), &aggregates)?;
    write_timings(&spec.output_dir.join("timings.csv"), &timings)?;
    write_metric_plots(&spec.output_dir, spec, &aggregates)?;

    Ok(ExperimentOutput {
        records,
        aggregates,
        diagnostics,
    })
}

/// Groups records by (ratio, estimator, metric) and reduces to mean,
/// standard error of the mean, and mean μ. Records are keyed and sorted
/// before reduction, so the result does not depend on job ordering.
pub fn aggregate(records: &[TrialRecord], diagnostics: &[TrialDiagnostics]) -> Vec<AggregateRow> {
    let mut diverged_by_ratio: BTreeMap<u64, usize> = BTreeMap::new();
    for d in diagnostics {
        if d.diverged {
            *diverged_by_ratio.entry(d.ratio.to_bits()).or_insert(0) += 1;
        }
    }
    let mut groups: BTreeMap<(u64, String, String), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.ratio.to_bits(), r.estimator.clone(), r.metric.clone()))
            .or_default()
            .push(r);
    }
    let mut rows = Vec::new();
    for ((ratio_bits, estimator, metric), group) in groups {
        let ratio = f64::from_bits(ratio_bits);
        let k = group.len() as f64;
        let mean = group.iter().map(|r| r.error).sum::<f64>() / k;
        let var = if group.len() > 1 {
            group.iter().map(|r| (r.error - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let mean_mu = group.iter().map(|r| r.mu).sum::<f64>() / k;
        rows.push(AggregateRow {
            scenario: group[0].scenario.clone(),
            n: group[0].n,
            ratio,
            m: group[0].m,
            estimator,
            metric,
            trials_used: group.len(),
            diverged_trials: *diverged_by_ratio.get(&ratio_bits).unwrap_or(&0),
            mean_error: mean,
            std_error: (var / k).sqrt(),
            mean_mu,
        });
    }
    rows
}

fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "scenario,n,m,ratio,trial,seed,estimator,metric,error,mu")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario, r.n, r.m, r.ratio, r.trial, r.seed, r.estimator, r.metric, r.error, r.mu
        )?;
    }
    out.flush()?;
    Ok(())
}

fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "scenario,n,ratio,m,estimator,metric,trials_used,diverged_trials,mean_error,std_error,mean_mu"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.n,
            r.ratio,
            r.m,
            r.estimator,
            r.metric,
            r.trials_used,
            r.diverged_trials,
            r.mean_error,
            r.std_error,
            r.mean_mu
        )?;
    }
    out.flush()?;
    Ok(())
}

fn write_diagnostics(path: &Path, diags: &[TrialDiagnostics]) -> Result<()> {
    let mut sorted: Vec<&TrialDiagnostics> = diags.iter().collect();
    sorted.sort_by(|a, b| {
        a.ratio
            .partial_cmp(&b.ratio)
            .unwrap()
            .then(a.trial.cmp(&b.trial))
    });
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "ratio,m,trial,seed,diverged,iterations,mu,floor_hits")?;
    for d in sorted {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.ratio, d.m, d.trial, d.seed, d.diverged, d.iterations, d.mu, d.floor_hits
        )?;
    }
    out.flush()?;
    Ok(())
}

fn write_timings(path: &Path, timings: &[(f64, usize, usize, f64)]) -> Result<()> {
    let mut sorted = timings.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)));
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "ratio,m,trial,wall_ms")?;
    for (ratio, m, trial, ms) in sorted {
        writeln!(out, "{ratio},{m},{trial},{ms:.3}")?;
    }
    out.flush()?;
    Ok(())
}

fn write_metric_plots(dir: &Path, spec: &ExperimentSpec, rows: &[AggregateRow]) -> Result<()> {
    let mut by_metric: BTreeMap<String, BTreeMap<String, Vec<(f64, f64)>>> = BTreeMap::new();
    for r in rows {
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
                points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                Series { name, points }
            })
            .collect();
        let svg = emit_plot(
            &PlotSpec {
                title: format!("{} / {}", spec.scenario.name(), metric),
                x_label: "M/N".into(),
                y_label: format!("mean {metric} error"),
                log_y: false,
            },
            &series,
        )?;
        std::fs::write(dir.join(format!("metric_{metric}.svg")), svg)?;
    }
    Ok(())
}

/// One row of the GAMP-free validation table: empirical mean distortion
/// of the metric-optimal estimator on directly simulated scalar channels,
/// next to the matching limit formula.
#[derive(Clone, Debug)]
pub struct DirectRow {
    pub metric: String,
    pub empirical: f64,
    pub std_error: f64,
    pub limit: f64,
    /// Present for the support metrics: empirical and theoretical
    /// (false positive, false negative) rates with their standard errors.
    pub rates: Option<DirectRates>,
}

#[derive(Clone, Debug)]
pub struct DirectRates {
    pub fpr_empirical: f64,
    pub fpr_std_error: f64,
    pub fpr_theory: f64,
    pub fnr_empirical: f64,
    pub fnr_std_error: f64,
    pub fnr_theory: f64,
}

/// Simulates the decoupled model directly — x from the prior, q = x +
/// Normal(0, μ) — and reports each metric-optimal estimator's empirical
/// per-component error alongside the limit formula.
pub fn run_scalar_channel_direct(
    prior: &SignalPrior,
    mu: f64,
    n_samples: usize,
    metrics: &[ErrorMetric],
    seed: u64,
) -> Result<Vec<DirectRow>> {
    prior.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let x = crate::model::sample_signal(prior, n_samples, mix_seed(seed, 101))?;
    let mut rng = rng_from_seed(mix_seed(seed, 102));
    let noise = Normal::new(0.0, mu.sqrt())
        .map_err(|e| Error::InvalidParameter(format!("noise setup failed: {e}")))?;
    let q: Vec<f64> = x.iter().map(|xj| xj + noise.sample(&mut rng)).collect();

    let mut rows = Vec::new();
    for metric in metrics {
        let estimate = estimate_metric_optimal(metric, prior, &q, mu)?;
        let distortions: Vec<f64> = estimate
            .iter()
            .zip(x.iter())
            .map(|(a, b)| metric.distance(*a, *b))
            .collect();
        let k = n_samples as f64;
        let mean = distortions.iter().sum::<f64>() / k;
        let var = distortions.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
        let beta = match metric {
            ErrorMetric::WeightedSupport(b) => Some(*b),
            _ => None,
        };
        let limit = LimitQuery {
            prior: *prior,
            mu,
            n: 1,
            metric: metric.clone(),
            beta,
        }
        .evaluate()?;

        let rates = match (metric, prior.slab) {
            (ErrorMetric::Support, Slab::Gaussian { sigma2 }) => Some(empirical_rates(
                &estimate,
                &x,
                roc_point(prior.sparsity, sigma2, mu, 0.5)?,
            )),
            (ErrorMetric::WeightedSupport(b), Slab::Gaussian { sigma2 }) => Some(empirical_rates(
                &estimate,
                &x,
                roc_point(prior.sparsity, sigma2, mu, *b)?,
            )),
            _ => None,
        };

        rows.push(DirectRow {
            metric: metric.name(),
            empirical: mean,
            std_error: (var / k).sqrt(),
            limit,
            rates,
        });
    }
    Ok(rows)
}

fn empirical_rates(estimate: &[f64], x: &[f64], theory: (f64, f64)) -> DirectRates {
    let mut zeros = 0usize;
    let mut false_pos = 0usize;
    let mut nonzeros = 0usize;
    let mut false_neg = 0usize;
    for (e, t) in estimate.iter().zip(x.iter()) {
        if *t == 0.0 {
            zeros += 1;
            if *e != 0.0 {
                false_pos += 1;
            }
        } else {
            nonzeros += 1;
            if *e == 0.0 {
                false_neg += 1;
            }
        }
    }
    let rate = |num: usize, den: usize| {
        if den == 0 {
            (0.0, 0.0)
        } else {
            let p = num as f64 / den as f64;
            (p, (p * (1.0 - p) / den as f64).sqrt())
        }
    };
    let (fpr, fpr_se) = rate(false_pos, zeros);
    let (fnr, fnr_se) = rate(false_neg, nonzeros);
    DirectRates {
        fpr_empirical: fpr,
        fpr_std_error: fpr_se,
        fpr_theory: theory.0,
        fnr_empirical: fnr,
        fnr_std_error: fnr_se,
        fnr_theory: theory.1,
    }
}

/// One ROC table row: the limit rates at the measured μ of a sweep point.
#[derive(Clone, Debug)]
pub struct RocRecord {
    pub ratio: f64,
    pub m: usize,
    pub mu: f64,
    pub beta: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub tpr: f64,
}

/// For each measurement ratio: measures μ by averaging `trials` GAMP runs,
/// then traces the ROC by sweeping β through the limit formulas. Writes
/// `roc.csv` and `roc.svg` into the output directory.
pub fn run_roc_sweep(spec: &ExperimentSpec) -> Result<Vec<RocRecord>> {
    spec.validate()?;
    let betas = spec
        .beta_sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("ROC sweeps need a beta_sweep".into()))?;
    let prior = spec.scenario.prior()?;
    let channel = spec.scenario.channel()?;
    let sigma2 = match prior.slab {
        Slab::Gaussian { sigma2 } => sigma2,
        Slab::Weibull { .. } => {
            return Err(Error::InvalidParameter(
                "ROC limits require the Gaussian-slab scenario".into(),
            ))
        }
    };
    std::fs::create_dir_all(&spec.output_dir)?;

    let mut records = Vec::new();
    for (ri, &ratio) in spec.m_over_n_sweep.iter().enumerate() {
        let m = ((ratio * spec.n as f64).round() as usize).max(1);
        let mus: Vec<f64> = (0..spec.trials)
            .into_par_iter()
            .map(|ti| {
                let seed = derive_seed(spec.base_seed, ri, ti);
                let instance = ProblemInstance::generate(prior, channel, spec.n, m, seed)?;
                Ok(run_gamp(&instance, &spec.gamp)?.mu)
            })
            .collect::<Result<_>>()?;
        let mu = mus.iter().sum::<f64>() / mus.len() as f64;
        for &beta in betas {
            let (fpr, fnr) = roc_point(prior.sparsity, sigma2, mu, beta)?;
            records.push(RocRecord {
                ratio,
                m,
                mu,
                beta,
                fpr,
                fnr,
                tpr: 1.0 - fnr,
            });
        }
    }

    let mut out = BufWriter::new(File::create(spec.output_dir.join("roc.csv"))?);
    writeln!(out, "ratio,m,mu,beta,fpr,fnr,tpr")?;
    for r in &records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.ratio, r.m, r.mu, r.beta, r.fpr, r.fnr, r.tpr
        )?;
    }
    out.flush()?;

    let mut by_ratio: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &records {
        by_ratio
            .entry(r.ratio.to_bits())
            .or_default()
            .push((r.fpr, r.tpr));
    }
    let series: Vec<Series> = by_ratio
        .into_iter()
        .map(|(bits, mut points)| {
            points.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Series {
                name: format!("M/N = {}", f64::from_bits(bits)),
                points,
            }
        })
        .collect();
    let svg = emit_plot(
        &PlotSpec {
            title: "ROC by weighted-support decisions".into(),
            x_label: "false positive rate".into(),
            y_label: "true positive rate".into(),
            log_y: false,
        },
        &series,
    )?;
    std::fs::write(spec.output_dir.join("roc.svg"), svg)?;

    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_distinguishes_indices() {
        let a = derive_seed(1, 0, 0);
        let b = derive_seed(1, 0, 1);
        let c = derive_seed(1, 1, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
        assert_eq!(a, derive_seed(1, 0, 0));
    }

    #[test]
    fn spec_validation_catches_bad_fields() {
        let dir = std::env::temp_dir();
        let mut spec = ExperimentSpec::desk_scale(Scenario::GaussianAwgn, dir.clone());
        assert!(spec.validate().is_ok());
        spec.m_over_n_sweep = vec![1.5];
        assert!(spec.validate().is_err());
        spec.m_over_n_sweep = vec![];
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::desk_scale(Scenario::GaussianAwgn, dir.clone());
        spec.trials = 0;
        assert!(spec.validate().is_err());
        let spec = ExperimentSpec::desk_scale(Scenario::ScalarChannelDirect, dir);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn scenario_parsing_round_trips() {
        for s in [
            Scenario::GaussianAwgn,
            Scenario::WeibullPoisson,
            Scenario::ScalarChannelDirect,
        ] {
            assert_eq!(Scenario::parse(s.name()).unwrap(), s);
        }
        assert!(Scenario::parse("other").is_err());
    }

    #[test]
    fn tiny_experiment_runs_and_squared_paths_coincide() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = ExperimentSpec::desk_scale(Scenario::GaussianAwgn, dir.path().into());
        spec.n = 128;
        spec.m_over_n_sweep = vec![0.5];
        spec.trials = 1;
        spec.metrics = vec![ErrorMetric::Squared];
        let out = run_experiment(&spec).unwrap();
        let optimal = out
            .records
            .iter()
            .find(|r| r.estimator == "metric_optimal")
            .unwrap();
        let baseline = out
            .records
            .iter()
            .find(|r| r.estimator == "posterior_mean")
            .unwrap();
        assert_eq!(optimal.error, baseline.error);
        assert!(dir.path().join("records.csv").exists());
        assert!(dir.path().join("aggregate.csv").exists());
        assert!(dir.path().join("diagnostics.csv").exists());
        assert!(dir.path().join("metric_squared.svg").exists());
    }

    #[test]
    fn aggregate_reproducible_from_records() {
        let rec = |trial: usize, error: f64| TrialRecord {
            scenario: "gaussian_awgn".into(),
            n: 10,
            m: 5,
            ratio: 0.5,
            trial,
            seed: trial as u64,
            estimator: "metric_optimal".into(),
            metric: "absolute".into(),
            error,
            mu: 0.01,
        };
        let records = vec![rec(0, 1.0), rec(1, 3.0)];
        let rows = aggregate(&records, &[]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_error, 2.0);
        // sample sd = √2, stderr = √2/√2 = 1
        assert!((rows[0].std_error - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direct_scalar_channel_matches_dense_gaussian_mse() {
        let prior = SignalPrior::sparse_gaussian(1.0, 1.0).unwrap();
        let mu = 0.25;
        let rows = run_scalar_channel_direct(&prior, mu, 40_000, &[ErrorMetric::Squared], 7)
            .unwrap();
        let row = &rows[0];
        let expect = 1.0 * mu / (1.0 + mu);
        assert!(
            (row.empirical - expect).abs() < 3.0 * row.std_error,
            "empirical {} vs {}",
            row.empirical,
            expect
        );
        assert!((row.limit - expect).abs() < 1e-6);
    }
}
