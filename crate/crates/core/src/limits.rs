//! Information-theoretic performance limits on the scalar channel
//! q = x + Normal(0, μ): the generic per-component limit for an arbitrary
//! additive metric, the absolute-error integral, and the closed forms for
//! support and weighted-support error, plus the ROC rates.

use std::sync::Mutex;

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::metric::{
    argmin_expected_distortion, expected_distortion, gaussian_zero_mass, scalar_median,
    ErrorMetric,
};
use crate::model::{SignalPrior, Slab};
use crate::posterior::posterior_with_evidence;
use crate::quad::adaptive_gauss_legendre;

/// Relative tolerance of the outer q-integration when the conditional
/// expectation has a closed form.
pub const LIMIT_REL_TOL: f64 = 1e-8;

/// Relative tolerance of the outer q-integration when the conditional
/// expectation itself comes from the gridded posterior, whose own accuracy
/// is grid-limited.
pub const GENERIC_REL_TOL: f64 = 1e-5;

/// A request for a limit value: prior, scalar-channel noise variance μ
/// (from a GAMP run or supplied directly), the signal dimension for
/// totals, and the metric.
#[derive(Clone, Debug)]
pub struct LimitQuery {
    pub prior: SignalPrior,
    pub mu: f64,
    pub n: usize,
    pub metric: ErrorMetric,
    pub beta: Option<f64>,
}

impl LimitQuery {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.metric.validate()?;
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be positive".into()));
        }
        match (&self.metric, self.beta) {
            (ErrorMetric::WeightedSupport(b), Some(bq)) if *b == bq => Ok(()),
            (ErrorMetric::WeightedSupport(_), _) => Err(Error::InvalidParameter(
                "beta field must match the weighted-support metric weight".into(),
            )),
            (_, Some(_)) => Err(Error::InvalidParameter(
                "beta is only meaningful for the weighted-support metric".into(),
            )),
            (_, None) => Ok(()),
        }
    }

    /// Total limit over N components, dispatching to the closed forms
    /// where they exist.
    pub fn evaluate(&self) -> Result<f64> {
        self.validate()?;
        let n = self.n as f64;
        match (&self.metric, &self.prior.slab) {
            (ErrorMetric::Absolute, _) => mmae_limit(&self.prior, self.mu, self.n),
            (ErrorMetric::Support, Slab::Gaussian { sigma2 }) => {
                mmsue_limit(self.prior.sparsity, *sigma2, self.mu, self.n)
            }
            (ErrorMetric::WeightedSupport(beta), Slab::Gaussian { sigma2 }) => {
                mmwse_limit(self.prior.sparsity, *sigma2, self.mu, self.n, *beta)
            }
            _ => Ok(n * mmue_scalar(&self.prior, self.mu, &self.metric)?),
        }
    }
}

/// Decision threshold for the MAP support estimate: b̂=1 iff q² > τ.
pub fn tau_support(p: f64, sigma2: f64, mu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "support threshold needs sparsity in (0,1), got {p}"
        )));
    }
    if !(sigma2 > 0.0 && mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "support threshold needs sigma2 > 0 and mu > 0, got sigma2={sigma2}, mu={mu}"
        )));
    }
    let snr = sigma2 / mu;
    Ok(2.0 * (sigma2 + mu) / snr * (((1.0 - p) / p) * (snr + 1.0).sqrt()).ln())
}

/// Weighted decision threshold τ′; β=0.5 recovers τ. Degenerate weights
/// (β ∈ {0,1}) are handled by the callers, not here.
pub fn tau_weighted(p: f64, sigma2: f64, mu: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "weighted threshold needs beta in (0,1), got {beta}"
        )));
    }
    if !(p > 0.0 && p < 1.0) || !(sigma2 > 0.0 && mu > 0.0) {
        return tau_support(p, sigma2, mu);
    }
    let snr = sigma2 / mu;
    Ok(2.0 * (sigma2 + mu) / snr
        * ((beta * (1.0 - p) / ((1.0 - beta) * p)) * (snr + 1.0).sqrt()).ln())
}

/// Outer integration edges for ∫ g(q) f_Q(q) dq: both mixture branches
/// (width √μ around 0 and the slab branch) get their own panels, plus any
/// caller-supplied kink locations.
fn q_edges(prior: &SignalPrior, mu: f64, extra: &[f64]) -> Vec<f64> {
    let sm = mu.sqrt();
    let (lo, hi) = match prior.slab {
        Slab::Gaussian { sigma2 } => {
            let l = 8.0 * (sigma2 + mu).sqrt();
            (-l, l)
        }
        Slab::Weibull { lambda, shape } => {
            // Weibull quantile at 1e-12 tail mass, then noise padding
            let x_hi = lambda * (12.0 * std::f64::consts::LN_10).powf(1.0 / shape);
            (-8.0 * sm, x_hi + 8.0 * sm)
        }
    };
    let mut edges = vec![lo, -8.0 * sm, -sm, 0.0, sm, 8.0 * sm, hi];
    edges.extend_from_slice(extra);
    edges.retain(|e| e.is_finite() && *e >= lo && *e <= hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();
    edges
}

/// Spike/slab posterior moments of the scalar channel with a Gaussian
/// slab: mass at zero, slab-branch mean, slab-branch standard deviation.
struct GaussianParts {
    pi0: f64,
    m1: f64,
    sd: f64,
}

fn gaussian_parts(p: f64, sigma2: f64, q: f64, mu: f64) -> GaussianParts {
    GaussianParts {
        pi0: gaussian_zero_mass(p, sigma2, q, mu),
        m1: q * sigma2 / (sigma2 + mu),
        sd: (sigma2 * mu / (sigma2 + mu)).sqrt(),
    }
}

fn normal_pdf(q: f64, var: f64) -> f64 {
    (-0.5 * q * q / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn std_pdf(d: f64) -> f64 {
    (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_cdf(d: f64) -> f64 {
    0.5 * erfc(-d / std::f64::consts::SQRT_2)
}

/// E|Z − c| for Z ~ Normal(m, sd²).
fn normal_abs_moment(m: f64, sd: f64, c: f64) -> f64 {
    let d = (c - m) / sd;
    sd * (2.0 * std_pdf(d) + d * (2.0 * std_cdf(d) - 1.0))
}

/// Median of the mixed posterior π₀·δ₀ + (1−π₀)·Normal(m1, sd²).
fn gaussian_posterior_median(parts: &GaussianParts) -> f64 {
    let cont = 1.0 - parts.pi0;
    if cont <= 0.0 {
        return 0.0;
    }
    let std = Normal::new(0.0, 1.0).unwrap();
    let left_of_zero = cont * std.cdf(-parts.m1 / parts.sd);
    if left_of_zero >= 0.5 {
        parts.m1 + parts.sd * std.inverse_cdf(0.5 / cont)
    } else if left_of_zero + parts.pi0 >= 0.5 {
        0.0
    } else {
        parts.m1 + parts.sd * std.inverse_cdf((0.5 - parts.pi0) / cont)
    }
}

/// Integrates q ↦ inner(q, posterior parts)·f_Q(q) entirely in closed
/// form, with no posterior grid in the loop.
fn integrate_gaussian_q(
    prior: &SignalPrior,
    sigma2: f64,
    mu: f64,
    extra_edges: &[f64],
    inner: &(dyn Fn(f64, &GaussianParts) -> f64 + Sync),
) -> Result<f64> {
    let p = prior.sparsity;
    let integrand = |q: f64| -> f64 {
        let fq = (1.0 - p) * normal_pdf(q, mu) + p * normal_pdf(q, sigma2 + mu);
        inner(q, &gaussian_parts(p, sigma2, q, mu)) * fq
    };
    adaptive_gauss_legendre(&integrand, &q_edges(prior, mu, extra_edges), LIMIT_REL_TOL)
}

/// Integrates q ↦ inner(posterior at q)·f_Q(q), propagating the first
/// error raised inside the integrand.
fn integrate_over_q(
    prior: &SignalPrior,
    mu: f64,
    extra_edges: &[f64],
    rel_tol: f64,
    inner: &(dyn Fn(&crate::posterior::MixedPosterior) -> Result<f64> + Sync),
) -> Result<f64> {
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let integrand = |q: f64| -> f64 {
        match posterior_with_evidence(prior, q, mu).and_then(|(post, fq)| {
            let v = inner(&post)?;
            Ok(v * fq)
        }) {
            Ok(v) => v,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                0.0
            }
        }
    };
    let edges = q_edges(prior, mu, extra_edges);
    let value = adaptive_gauss_legendre(&integrand, &edges, rel_tol);
    if let Some(e) = failure.into_inner().unwrap().take() {
        return Err(e);
    }
    value
}

/// Per-component limit for an arbitrary additive metric: the expected
/// distortion of the estimator that minimizes the conditional expected
/// distortion at every q.
pub fn mmue_scalar(prior: &SignalPrior, mu: f64, metric: &ErrorMetric) -> Result<f64> {
    prior.validate()?;
    metric.validate()?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    // with a Gaussian slab the conditional minima have closed forms, so
    // the outer integrand is cheap and machine-accurate
    if let Slab::Gaussian { sigma2 } = prior.slab {
        let p = prior.sparsity;
        match metric {
            ErrorMetric::Squared => {
                return integrate_gaussian_q(prior, sigma2, mu, &[], &|_q, parts| {
                    let cont = 1.0 - parts.pi0;
                    let mean = cont * parts.m1;
                    cont * (parts.sd * parts.sd + parts.m1 * parts.m1) - mean * mean
                });
            }
            ErrorMetric::Absolute => {
                return integrate_gaussian_q(prior, sigma2, mu, &[], &|_q, parts| {
                    let med = gaussian_posterior_median(parts);
                    parts.pi0 * med.abs()
                        + (1.0 - parts.pi0) * normal_abs_moment(parts.m1, parts.sd, med)
                });
            }
            ErrorMetric::Support => {
                // decision-boundary kinks at q = ±√τ
                let mut extra = Vec::new();
                if p > 0.0 && p < 1.0 {
                    let tau = tau_support(p, sigma2, mu)?;
                    if tau > 0.0 {
                        extra.push(tau.sqrt());
                        extra.push(-tau.sqrt());
                    }
                }
                return integrate_gaussian_q(prior, sigma2, mu, &extra, &|_q, parts| {
                    parts.pi0.min(1.0 - parts.pi0)
                });
            }
            ErrorMetric::WeightedSupport(beta) => {
                let beta = *beta;
                if beta == 0.0 || beta == 1.0 {
                    // all-nonzero / all-zero decisions have zero error on
                    // their weighted side
                    return Ok(0.0);
                }
                let mut extra = Vec::new();
                if p > 0.0 && p < 1.0 {
                    let tau = tau_weighted(p, sigma2, mu, beta)?;
                    if tau > 0.0 {
                        extra.push(tau.sqrt());
                        extra.push(-tau.sqrt());
                    }
                }
                return integrate_gaussian_q(prior, sigma2, mu, &extra, &|_q, parts| {
                    (beta * parts.pi0).min((1.0 - beta) * (1.0 - parts.pi0))
                });
            }
            _ => {}
        }
    }
    integrate_over_q(prior, mu, &[], GENERIC_REL_TOL, &|post| {
        Ok(argmin_expected_distortion(post, metric).1)
    })
}

/// Total absolute-error limit: N times the outer q-integral of the
/// posterior's mean absolute deviation around its median. Gaussian slabs
/// go through the closed-form conditional expectation.
pub fn mmae_limit(prior: &SignalPrior, mu: f64, n: usize) -> Result<f64> {
    prior.validate()?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let scalar = match prior.slab {
        Slab::Gaussian { .. } => mmue_scalar(prior, mu, &ErrorMetric::Absolute)?,
        Slab::Weibull { .. } => integrate_over_q(prior, mu, &[], GENERIC_REL_TOL, &|post| {
            let med = post.median();
            Ok(expected_distortion(post, &ErrorMetric::Absolute, med))
        })?,
    };
    Ok(n as f64 * scalar)
}

/// Total support-error limit, Gaussian slab closed form. τ ≤ 0 means the
/// always-nonzero decision: every zero component is a false positive.
pub fn mmsue_limit(p: f64, sigma2: f64, mu: f64, n: usize) -> Result<f64> {
    let tau = tau_support(p, sigma2, mu)?;
    let nf = n as f64;
    if tau <= 0.0 {
        return Ok(nf * (1.0 - p));
    }
    Ok(nf * (1.0 - p) * erfc((tau / (2.0 * mu)).sqrt())
        + nf * p * erf((tau / (2.0 * (sigma2 + mu))).sqrt()))
}

/// Total weighted-support-error limit. β=0 and β=1 are the degenerate
/// all-nonzero / all-zero decisions, both with zero weighted error on
/// their counted side.
pub fn mmwse_limit(p: f64, sigma2: f64, mu: f64, n: usize, beta: f64) -> Result<f64> {
    if !(beta.is_finite() && (0.0..=1.0).contains(&beta)) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in [0,1], got {beta}"
        )));
    }
    let nf = n as f64;
    if beta == 0.0 {
        // everything declared nonzero: only false positives count, weight β=0
        let _ = tau_support(p, sigma2, mu)?;
        return Ok(0.0);
    }
    if beta == 1.0 {
        // everything declared zero: only false negatives count, weight 1−β=0
        let _ = tau_support(p, sigma2, mu)?;
        return Ok(0.0);
    }
    let tau = tau_weighted(p, sigma2, mu, beta)?;
    if tau <= 0.0 {
        return Ok(nf * beta * (1.0 - p));
    }
    Ok(nf * beta * (1.0 - p) * erfc((tau / (2.0 * mu)).sqrt())
        + nf * (1.0 - beta) * p * erf((tau / (2.0 * (sigma2 + mu))).sqrt()))
}

/// One point of the receiver operating characteristic: false positive and
/// false negative rates of the weighted decision at weight β.
pub fn roc_point(p: f64, sigma2: f64, mu: f64, beta: f64) -> Result<(f64, f64)> {
    if !(beta.is_finite() && (0.0..=1.0).contains(&beta)) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in [0,1], got {beta}"
        )));
    }
    if beta == 0.0 {
        let _ = tau_support(p, sigma2, mu)?;
        return Ok((1.0, 0.0));
    }
    if beta == 1.0 {
        let _ = tau_support(p, sigma2, mu)?;
        return Ok((0.0, 1.0));
    }
    let tau = tau_weighted(p, sigma2, mu, beta)?;
    if tau <= 0.0 {
        return Ok((1.0, 0.0));
    }
    Ok((
        erfc((tau / (2.0 * mu)).sqrt()),
        erf((tau / (2.0 * (sigma2 + mu))).sqrt()),
    ))
}

/// Median helper retained for external callers that already hold (q, μ):
/// delegates to the estimator's scalar median.
pub fn posterior_median(prior: &SignalPrior, q: f64, mu: f64) -> Result<f64> {
    scalar_median(prior, q, mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_zero_at_unit_log_argument() {
        // σ²/μ = 3, p = 2/3: (1−p)√(σ²/μ+1)/p = (1/3)·2/(2/3) = 1
        let tau = tau_support(2.0 / 3.0, 3.0, 1.0).unwrap();
        assert!(tau.abs() < 1e-12, "tau = {tau}");
    }

    #[test]
    fn tau_weighted_half_equals_tau() {
        let a = tau_support(0.03, 1.0, 0.01).unwrap();
        let b = tau_weighted(0.03, 1.0, 0.01, 0.5).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn mmsue_degenerate_threshold() {
        let n = 300;
        let v = mmsue_limit(2.0 / 3.0, 3.0, 1.0, n).unwrap();
        assert!((v - n as f64 / 3.0).abs() < 1e-9, "v = {v}");
    }

    #[test]
    fn mmsue_tiny_noise_near_perfect() {
        // at μ = 1e-6 the limit is ~1.1 misclassified components out of
        // 300 nonzeros: the erf term at √(τ/(2(σ²+μ))) ≈ 2.9 dominates
        let v = mmsue_limit(0.03, 1.0, 1e-6, 10_000).unwrap();
        assert!(v < 2.0, "v = {v}");
        assert!(v > 0.0, "v = {v}");
    }

    #[test]
    fn mmsue_rejects_degenerate_sparsity() {
        assert!(mmsue_limit(0.0, 1.0, 0.01, 10).is_err());
        assert!(mmsue_limit(1.0, 1.0, 0.01, 10).is_err());
    }

    #[test]
    fn mmwse_half_is_half_mmsue() {
        let s = mmsue_limit(0.03, 1.0, 0.01, 1000).unwrap();
        let w = mmwse_limit(0.03, 1.0, 0.01, 1000, 0.5).unwrap();
        assert!((s - 2.0 * w).abs() < 1e-10 * s);
    }

    #[test]
    fn mmwse_endpoints_vanish() {
        assert_eq!(mmwse_limit(0.03, 1.0, 0.01, 1000, 0.0).unwrap(), 0.0);
        assert_eq!(mmwse_limit(0.03, 1.0, 0.01, 1000, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn roc_endpoints() {
        assert_eq!(roc_point(0.03, 1.0, 0.01, 0.0).unwrap(), (1.0, 0.0));
        assert_eq!(roc_point(0.03, 1.0, 0.01, 1.0).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn roc_half_decomposes_mmsue() {
        let p = 0.03;
        let (fpr, fnr) = roc_point(p, 1.0, 0.01, 0.5).unwrap();
        let per_component = mmsue_limit(p, 1.0, 0.01, 1).unwrap();
        assert!(((1.0 - p) * fpr + p * fnr - per_component).abs() < 1e-12);
    }

    #[test]
    fn roc_monotone_in_beta() {
        let mut prev = roc_point(0.03, 1.0, 0.01, 0.01).unwrap();
        for i in 1..40 {
            let beta = 0.01 + 0.97 * i as f64 / 39.0;
            let cur = roc_point(0.03, 1.0, 0.01, beta).unwrap();
            assert!(cur.0 <= prev.0 + 1e-12, "fpr must not grow with beta");
            assert!(cur.1 >= prev.1 - 1e-12, "fnr must not shrink with beta");
            prev = cur;
        }
    }

    #[test]
    fn mmue_squared_dense_gaussian_is_scalar_mmse() {
        let prior = SignalPrior::sparse_gaussian(1.0, 2.0).unwrap();
        let mu = 0.5;
        let v = mmue_scalar(&prior, mu, &ErrorMetric::Squared).unwrap();
        let expect = 2.0 * mu / (2.0 + mu);
        assert!((v - expect).abs() < 1e-6 * expect, "v = {v}, expect = {expect}");
    }

    #[test]
    fn mmue_absolute_dense_gaussian_is_mad() {
        let prior = SignalPrior::sparse_gaussian(1.0, 1.0).unwrap();
        let mu = 0.25;
        let v = mmue_scalar(&prior, mu, &ErrorMetric::Absolute).unwrap();
        // mean absolute deviation of a Normal(·, σ²μ/(σ²+μ)) posterior
        let expect = (2.0 * 1.0 * mu / (std::f64::consts::PI * (1.0 + mu))).sqrt();
        assert!((v - expect).abs() < 1e-7, "v = {v}, expect = {expect}");
    }

    #[test]
    fn mmue_support_matches_closed_form() {
        let prior = SignalPrior::sparse_gaussian(0.05, 1.0).unwrap();
        let mu = 0.02;
        let v = mmue_scalar(&prior, mu, &ErrorMetric::Support).unwrap();
        let closed = mmsue_limit(0.05, 1.0, mu, 1).unwrap();
        assert!(
            (v - closed).abs() < 1e-6 * closed.max(1e-12),
            "v = {v}, closed = {closed}"
        );
    }

    #[test]
    fn mmae_limit_agrees_with_generic_path() {
        let prior = SignalPrior::sparse_gaussian(0.1, 1.0).unwrap();
        let mu = 0.05;
        let a = mmae_limit(&prior, mu, 1).unwrap();
        let b = mmue_scalar(&prior, mu, &ErrorMetric::Absolute).unwrap();
        assert!((a - b).abs() < 1e-6 * a.max(1e-12), "a = {a}, b = {b}");
    }

    #[test]
    fn mmae_vanishes_in_noiseless_limit() {
        let prior = SignalPrior::sparse_gaussian(0.03, 1.0).unwrap();
        let n = 1000;
        let v = mmae_limit(&prior, 1e-10, n).unwrap();
        assert!(v < 1e-4 * n as f64 * 0.03, "v = {v}");
    }

    #[test]
    fn query_validation() {
        let prior = SignalPrior::sparse_gaussian(0.03, 1.0).unwrap();
        let bad = LimitQuery {
            prior: prior.clone(),
            mu: 0.01,
            n: 10,
            metric: ErrorMetric::Squared,
            beta: Some(0.3),
        };
        assert!(bad.validate().is_err());
        let good = LimitQuery {
            prior,
            mu: 0.01,
            n: 10,
            metric: ErrorMetric::WeightedSupport(0.3),
            beta: Some(0.3),
        };
        assert!(good.validate().is_ok());
        let w = good.evaluate().unwrap();
        let direct = mmwse_limit(0.03, 1.0, 0.01, 10, 0.3).unwrap();
        assert!((w - direct).abs() < 1e-12);
    }
}
