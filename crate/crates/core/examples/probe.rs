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
    let ratios = [0.2, 0.3, 0.4, 0.5];
    for base_seed in seeds {
        let t0 = Instant::now();
        let dir = PathBuf::from(format!("/tmp/probe_seed_{base_seed}"));
        std::fs::create_dir_all(&dir).unwrap();
        let spec = ExperimentSpec {
            metrics: vec![
                ErrorMetric::Absolute,
                ErrorMetric::Support,
                ErrorMetric::WeightedSupport(0.3),
            ],
            base_seed,
            output_dir: dir,
            ..ExperimentSpec::desk_scale(Scenario::GaussianAwgn, PathBuf::new())
        };
        let out = run_experiment(&spec).unwrap();
        let rows = &out.aggregates;

        let mut worst: f64 = 0.0;
        for metric in ["absolute", "support", "wsupport_0.3"] {
            for r in ratios {
                let opt = agg(rows, "metric_optimal", metric, r).mean_error;
                let lim = agg(rows, "limit", metric, r).mean_error;
                worst = worst.max((opt / lim - 1.0).abs());
            }
        }
        let c6 = worst <= 0.05;
        println!(
            "seed={base_seed}: c6={c6} worst_rel={worst:.3} [{:.1}s]",
            t0.elapsed().as_secs_f64()
        );
    }
}
