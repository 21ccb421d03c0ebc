//! Independent numerical oracles for the denoisers, the scalar median,
//! and the tiny-system posterior: each check recomputes the target
//! quantity with a method deliberately different from the library's
//! (dense-grid quadrature, mixed-CDF evaluation, exhaustive support
//! enumeration) and pins the agreement.

mod common;

use csmet::metric::scalar_median;
use csmet::{
    input_denoiser, output_denoiser, posterior, run_gamp, GampConfig, OutputChannel,
    ProblemInstance, SignalPrior,
};

const LN_2PI: f64 = 1.8378770664093453;

fn log_normal_pdf(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * x * x / var
}

fn normal_pdf(x: f64, var: f64) -> f64 {
    log_normal_pdf(x, var).exp()
}

fn rel_close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs + rel * b.abs().max(a.abs())
}

/// Trapezoid sum over a uniform grid of `points` panels on [0, hi].
fn trapezoid(f: impl Fn(f64) -> f64, hi: f64, points: usize) -> f64 {
    let h = hi / points as f64;
    let mut acc = 0.5 * (f(0.0) + f(hi));
    for i in 1..points {
        acc += f(i as f64 * h);
    }
    acc * h
}

#[test]
fn weibull_input_denoiser_matches_grid_oracle() {
    // With u = (x/λ)^k the slab density contributes exactly e^{-u} du, so
    // a plain uniform trapezoid rule in u is accurate and singularity-free
    // — an entirely different route than the library's adaptive quadrature.
    let cases = [
        (0.2, 1.0, 0.5, -0.5, 0.25),
        (0.2, 1.0, 0.5, 0.1, 0.04),
        (0.2, 1.0, 0.5, 0.8, 0.25),
        (0.03, 1.0, 0.5, 2.0, 0.09),
        (0.1, 2.0, 1.0, 1.5, 0.16),
        (0.4, 0.5, 2.0, 0.3, 0.01),
    ];
    for (p, lambda, shape, r, s) in cases {
        let prior = SignalPrior::sparse_weibull(p, lambda, shape).unwrap();
        let (mean, var) = input_denoiser(&prior, r, s).unwrap();

        let x_of = |u: f64| lambda * u.powf(1.0 / shape);
        let u_hi: f64 = 60.0;
        let m = |j: i32| {
            trapezoid(
                |u| (-u).exp() * x_of(u).powi(j) * normal_pdf(r - x_of(u), s),
                u_hi,
                2_000_000,
            )
        };
        let (m0, m1, m2) = (m(0), m(1), m(2));
        let ev_spike = (1.0 - p) * normal_pdf(r, s);
        let pi_slab = p * m0 / (p * m0 + ev_spike);
        let mean_oracle = pi_slab * m1 / m0;
        let var_oracle = pi_slab * m2 / m0 - mean_oracle * mean_oracle;

        assert!(
            rel_close(mean, mean_oracle, 1e-6, 1e-9),
            "mean mismatch at (p={p}, λ={lambda}, k={shape}, r={r}, s={s}): \
             {mean} vs oracle {mean_oracle}"
        );
        assert!(
            rel_close(var, var_oracle, 1e-6, 1e-9),
            "variance mismatch at (p={p}, λ={lambda}, k={shape}, r={r}, s={s}): \
             {var} vs oracle {var_oracle}"
        );
    }
}

#[test]
fn poisson_output_denoiser_matches_grid_oracle() {
    let alpha = 100.0;
    let channel = OutputChannel::Poisson { scaling: alpha };
    let cases: [(f64, f64, f64); 5] = [
        (0.3, 0.01, 25.0),
        (0.02, 0.0004, 0.0),
        (-0.05, 0.001, 3.0),
        (1.2, 0.25, 80.0),
        (0.5, 0.09, 7.0),
    ];
    for (p_hat, tau_p, y) in cases {
        let (score, curvature) = output_denoiser(&channel, p_hat, tau_p, y).unwrap();

        let lgy = ln_gamma(y + 1.0);
        let log_f = |w: f64| {
            if w <= 0.0 {
                return if y == 0.0 && w == 0.0 {
                    log_normal_pdf(-p_hat, tau_p)
                } else {
                    f64::NEG_INFINITY
                };
            }
            let pois = if y == 0.0 {
                -alpha * w
            } else {
                y * (alpha * w).ln() - alpha * w - lgy
            };
            pois + log_normal_pdf(w - p_hat, tau_p)
        };
        let w_hi = (p_hat + 15.0 * tau_p.sqrt())
            .max(y / alpha + 15.0 * (y + 1.0).sqrt() / alpha)
            .max(1e-3);
        // log-scale anchor at the coarse-grid maximum keeps the weights
        // inside floating-point range
        let mut lmax = f64::NEG_INFINITY;
        for i in 0..=4096 {
            lmax = lmax.max(log_f(i as f64 / 4096.0 * w_hi));
        }
        let f = |w: f64| {
            let l = log_f(w) - lmax;
            if l < -700.0 {
                0.0
            } else {
                l.exp()
            }
        };
        let points = 2_000_000;
        let m0 = trapezoid(&f, w_hi, points);
        let m1 = trapezoid(|w| w * f(w), w_hi, points);
        let m2 = trapezoid(|w| w * w * f(w), w_hi, points);
        let ew = m1 / m0;
        let vw = (m2 / m0 - ew * ew).max(0.0);
        let score_oracle = (ew - p_hat) / tau_p;
        let curvature_oracle = ((1.0 - vw / tau_p) / tau_p).max(0.0);

        assert!(
            rel_close(score, score_oracle, 1e-6, 1e-9),
            "score mismatch at (p_hat={p_hat}, tau_p={tau_p}, y={y}): \
             {score} vs oracle {score_oracle}"
        );
        assert!(
            rel_close(curvature, curvature_oracle, 1e-6, 1e-6),
            "curvature mismatch at (p_hat={p_hat}, tau_p={tau_p}, y={y}): \
             {curvature} vs oracle {curvature_oracle}"
        );
    }
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[test]
fn gaussian_median_satisfies_mixed_cdf_equation() {
    // The median must put exactly half the mixed posterior mass on each
    // side; evaluate the closed-form mixed CDF independently.
    for p in [0.03, 0.3] {
        for sigma2 in [1.0, 4.0] {
            let prior = SignalPrior::sparse_gaussian(p, sigma2).unwrap();
            for mu in [0.01, 0.3] {
                for q in [-2.0, -0.2, 0.05, 0.5, 3.0] {
                    let med = scalar_median(&prior, q, mu).unwrap();

                    let ev0 = (1.0 - p) * normal_pdf(q, mu);
                    let ev1 = p * normal_pdf(q, sigma2 + mu);
                    let pi0 = ev0 / (ev0 + ev1);
                    let m1 = q * sigma2 / (sigma2 + mu);
                    let sd = (sigma2 * mu / (sigma2 + mu)).sqrt();
                    let phi = |t: f64| 0.5 * erfc_neg((t - m1) / sd);
                    let cdf_at = |t: f64| (1.0 - pi0) * phi(t) + if t >= 0.0 { pi0 } else { 0.0 };

                    if med == 0.0 {
                        let left = (1.0 - pi0) * phi(0.0);
                        assert!(
                            left <= 0.5 + 1e-9 && left + pi0 >= 0.5 - 1e-9,
                            "median 0 does not straddle half mass at \
                             (p={p}, σ²={sigma2}, μ={mu}, q={q}): left={left}, atom={pi0}"
                        );
                    } else {
                        let c = cdf_at(med);
                        assert!(
                            (c - 0.5).abs() < 1e-9,
                            "median CDF {c} != 1/2 at (p={p}, σ²={sigma2}, μ={mu}, q={q}), \
                             med={med}"
                        );
                    }
                }
            }
        }
    }
}

/// Φ(x) through erfc of the negated argument, stable in both tails.
fn erfc_neg(x: f64) -> f64 {
    statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[test]
fn gamp_tracks_exhaustive_posterior_on_tiny_systems() {
    let prior = SignalPrior::sparse_gaussian(0.25, 1.0).unwrap();
    let channel = OutputChannel::Awgn {
        noise_variance: 1e-3,
    };
    // Tiny loopy systems orbit the sum-product fixed point rather than
    // reaching it, so the estimate is read off as the orbit average over a
    // long window after a burn-in.
    let config = GampConfig {
        max_iterations: 16_000,
        damping: 0.55,
        average_window: 15_500,
        ..GampConfig::default()
    };
    let mut nmses = Vec::new();
    for seed in 0..50u64 {
        let instance = ProblemInstance::generate(prior, channel, 12, 8, seed).unwrap();
        let gamp = run_gamp(&instance, &config).unwrap();
        let exact = common::exact_posterior_mean(&instance, 1.0, 1e-3);
        nmses.push(common::nmse(&gamp.x_mmse, &exact));
    }
    let mean = nmses.iter().sum::<f64>() / nmses.len() as f64;
    assert!(
        mean < 0.05,
        "mean NMSE vs exhaustive posterior too large: {mean} ({nmses:?})"
    );
}

#[test]
fn posterior_is_normalized_and_moments_are_optimal() {
    let priors = [
        SignalPrior::sparse_gaussian(0.1, 1.0).unwrap(),
        SignalPrior::sparse_gaussian(0.5, 3.0).unwrap(),
        SignalPrior::sparse_weibull(0.2, 1.0, 0.5).unwrap(),
        SignalPrior::sparse_weibull(0.05, 2.0, 1.5).unwrap(),
    ];
    for prior in &priors {
        for q in [-1.5, -0.1, 0.0, 0.4, 2.5] {
            for mu in [0.01, 0.2] {
                let post = posterior(prior, q, mu).unwrap();
                let total = post.zero_mass + post.continuous_mass();
                assert!(
                    (total - 1.0).abs() < 1e-8,
                    "posterior mass {total} != 1 at q={q}, mu={mu}"
                );

                // the mean minimizes expected squared loss among probes
                let mean = post.mean();
                let at = |c: f64| post.expect(|x| (x - c) * (x - c));
                let base = at(mean);
                for d in [-0.05, 0.05] {
                    assert!(
                        base <= at(mean + d) + 1e-12,
                        "posterior mean is not the squared-loss minimizer at q={q}, mu={mu}"
                    );
                }

                // the median splits the mass in half, up to the mass of
                // the single grid panel the indicator cuts through
                let med = post.median();
                let left = post.expect(|x| if x < med { 1.0 } else { 0.0 });
                let right = post.expect(|x| if x > med { 1.0 } else { 0.0 });
                assert!(
                    left <= 0.505 && right <= 0.505,
                    "median {med} splits mass {left}/{right} at q={q}, mu={mu}"
                );
            }
        }
    }
}
