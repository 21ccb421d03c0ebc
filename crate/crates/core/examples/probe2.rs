use std::path::PathBuf;
use std::time::Instant;

use csmet::harness::{run_experiment, AggregateRow, ExperimentSpec, Scenario};
use csmet::ErrorMetric;

fn agg<'a>(rows: &'a [AggregateRow], estimator: &str, metric: &str, ratio: f64) -> &'a AggregateRow {
    rows.iter()
        .find(|r| r.estimator == estimator && r.metric == metric && (r.ratio - ratio).abs() < 1e-12)
        .unwrap_or_else(|| panic!("missing aggregate {estimator}/{metric}/{ratio}"))
}

fn main() {
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().unwrap())
        .collect();
    let ratios = [0.2, 0.35, 0.5];
    for base_seed in seeds {
        let t0 = Instant::now();
        let dir = PathBuf::from(format!("/tmp/probe_wb_seed_{base_seed}"));
        std::fs::create_dir_all(&dir).unwrap();
        let spec = ExperimentSpec {
            m_over_n_sweep: ratios.to_vec(),
            metrics: vec![
                ErrorMetric::Power(0.5),
                ErrorMetric::Absolute,
                ErrorMetric::Power(1.5),
            ],
            base_seed,
            output_dir: dir,
            ..ExperimentSpec::desk_scale(Scenario::WeibullPoisson, PathBuf::new())
        };
        let out = run_experiment(&spec).unwrap();
        let rows = &out.aggregates;

        let mut c7a = true;
        for metric in ["power_0.5", "absolute", "power_1.5"] {
            for r in ratios {
                let opt = agg(rows, "metric_optimal", metric, r);
                let pm = agg(rows, "posterior_mean", metric, r);
                if opt.mean_error > pm.mean_error + pm.std_error {
                    println!(
                        "  c7b FAIL {metric} r={r}: opt={:.4} pm={:.4}+-{:.4}",
                        opt.mean_error, pm.mean_error, pm.std_error
                    );
                    c7a = false;
                }
            }
        }
        println!(
            "weibull seed={base_seed}: c7b={c7a} [{:.1}s]",
            t0.elapsed().as_secs_f64()
        );
    }
}
