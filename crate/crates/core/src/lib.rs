//! Compressed-sensing estimation toolkit: decouples a noisy linear-mixing
//! system into equivalent scalar Gaussian channels via an approximate
//! message passing iteration, computes the Bayes-optimal estimate for any
//! additive error metric on those channels, and evaluates the matching
//! information-theoretic performance limits. An experiment harness and
//! CoSaMP baseline round out the comparison tooling.

pub mod cosamp;
pub mod error;
pub mod gamp;
pub mod harness;
pub mod io;
pub mod limits;
pub mod mat;
pub mod metric;
pub mod model;
pub mod plot;
pub mod posterior;
pub mod quad;

pub use cosamp::{cosamp, cosamp_for_instance, CosampConfig, CosampResult};
pub use error::{Error, Result};
pub use gamp::{input_denoiser, output_denoiser, run_gamp, GampConfig, ScalarChannelResult};
pub use harness::{
    derive_seed, run_experiment, run_roc_sweep, run_scalar_channel_direct, ExperimentOutput,
    ExperimentSpec, Scenario, TrialRecord,
};
pub use limits::{
    mmae_limit, mmsue_limit, mmue_scalar, mmwse_limit, roc_point, tau_support, tau_weighted,
    LimitQuery,
};
pub use mat::Mat;
pub use metric::{
    estimate_generic, estimate_metric_optimal, estimate_mmae, estimate_mmse, estimate_support,
    estimate_wsupport, evaluate_error, ErrorMetric,
};
pub use model::{
    channel_log_likelihood, channel_sample, generate_matrix, measure, sample_signal,
    OutputChannel, ProblemInstance, SignalPrior, Slab,
};
pub use plot::{emit_plot, PlotSpec, Series};
pub use posterior::{posterior, MixedPosterior};
