//! Synthetic problem generation: sparse i.i.d. signals, Bernoulli
//! measurement matrices with unit-norm rows, and AWGN / Poisson output
//! channels.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, Weibull};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::mat::Mat;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Continuous part of a spike-and-slab prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slab {
    Gaussian { sigma2: f64 },
    Weibull { lambda: f64, shape: f64 },
}

/// I.i.d. per-component prior: zero with probability 1-p, slab draw with
/// probability p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPrior {
    pub sparsity: f64,
    pub slab: Slab,
}

impl SignalPrior {
    pub fn sparse_gaussian(sparsity: f64, sigma2: f64) -> Result<Self> {
        let prior = SignalPrior {
            sparsity,
            slab: Slab::Gaussian { sigma2 },
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn sparse_weibull(sparsity: f64, lambda: f64, shape: f64) -> Result<Self> {
        let prior = SignalPrior {
            sparsity,
            slab: Slab::Weibull { lambda, shape },
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sparsity.is_finite() || !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::InvalidParameter(format!(
                "sparsity must lie in [0,1], got {}",
                self.sparsity
            )));
        }
        match self.slab {
            Slab::Gaussian { sigma2 } => {
                if !sigma2.is_finite() || sigma2 <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "slab variance must be positive, got {sigma2}"
                    )));
                }
            }
            Slab::Weibull { lambda, shape } => {
                if !lambda.is_finite() || lambda <= 0.0 || !shape.is_finite() || shape <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "weibull parameters must be positive, got lambda={lambda}, k={shape}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn slab_mean(&self) -> f64 {
        match self.slab {
            Slab::Gaussian { .. } => 0.0,
            Slab::Weibull { lambda, shape } => lambda * gamma(1.0 + 1.0 / shape),
        }
    }

    pub fn slab_second_moment(&self) -> f64 {
        match self.slab {
            Slab::Gaussian { sigma2 } => sigma2,
            Slab::Weibull { lambda, shape } => lambda * lambda * gamma(1.0 + 2.0 / shape),
        }
    }

    /// Prior mean p·E[slab].
    pub fn mean(&self) -> f64 {
        self.sparsity * self.slab_mean()
    }

    /// Prior variance p·E[slab²] − (p·E[slab])².
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.sparsity * self.slab_second_moment() - m * m
    }

    /// Log density of the slab at x (−∞ where the slab has no support).
    pub fn slab_log_density(&self, x: f64) -> f64 {
        match self.slab {
            Slab::Gaussian { sigma2 } => -0.5 * (LN_2PI + sigma2.ln()) - 0.5 * x * x / sigma2,
            Slab::Weibull { lambda, shape } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let t = x / lambda;
                shape.ln() - lambda.ln() + (shape - 1.0) * t.ln() - t.powf(shape)
            }
        }
    }
}

/// Separable output channel applied to w = Φx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputChannel {
    Awgn { noise_variance: f64 },
    Poisson { scaling: f64 },
}

impl OutputChannel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OutputChannel::Awgn { noise_variance } => {
                if !noise_variance.is_finite() || noise_variance <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "awgn noise variance must be positive, got {noise_variance}"
                    )));
                }
            }
            OutputChannel::Poisson { scaling } => {
                if !scaling.is_finite() || scaling <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "poisson scaling must be positive, got {scaling}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One generated problem: ground truth, matrix, noiseless measurement,
/// observation, and the generating parameters.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub x: Vec<f64>,
    pub matrix: Mat,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub channel: OutputChannel,
    pub prior: SignalPrior,
    pub seed: u64,
}

impl ProblemInstance {
    /// Draws a complete instance. The signal, matrix, and channel noise use
    /// decorrelated streams derived from `seed`.
    pub fn generate(
        prior: SignalPrior,
        channel: OutputChannel,
        n: usize,
        m: usize,
        seed: u64,
    ) -> Result<Self> {
        prior.validate()?;
        channel.validate()?;
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter("n and m must be positive".into()));
        }
        let x = sample_signal(&prior, n, mix_seed(seed, 1))?;
        let matrix = generate_matrix(m, n, mix_seed(seed, 2))?;
        let w = measure(&matrix, &x)?;
        let y = channel_sample(&channel, &w, mix_seed(seed, 3))?;
        Ok(ProblemInstance {
            x,
            matrix,
            w,
            y,
            channel,
            prior,
            seed,
        })
    }
}

/// SplitMix64 step; used everywhere a sub-stream seed is derived.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Each component independently zero with probability 1−p, else a slab draw.
pub fn sample_signal(prior: &SignalPrior, n: usize, seed: u64) -> Result<Vec<f64>> {
    prior.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; n];
    match prior.slab {
        Slab::Gaussian { sigma2 } => {
            let slab = Normal::new(0.0, sigma2.sqrt()).unwrap();
            for xi in x.iter_mut() {
                let on = rng.random::<f64>() < prior.sparsity;
                let draw = slab.sample(&mut rng);
                if on {
                    *xi = draw;
                }
            }
        }
        Slab::Weibull { lambda, shape } => {
            let slab = Weibull::new(lambda, shape)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for xi in x.iter_mut() {
                let on = rng.random::<f64>() < prior.sparsity;
                let draw = slab.sample(&mut rng);
                if on {
                    *xi = draw;
                }
            }
        }
    }
    Ok(x)
}

/// Bernoulli(0.5) entries in {0,1}; every row normalized to unit Euclidean
/// norm. All-zero rows are redrawn so the unit-norm invariant is
/// unconditional.
pub fn generate_matrix(m: usize, n: usize, seed: u64) -> Result<Mat> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("m and n must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut mat = Mat::zeros(m, n);
    for i in 0..m {
        loop {
            let row = mat.row_mut(i);
            let mut count = 0u64;
            for v in row.iter_mut() {
                let bit = rng.random::<bool>();
                *v = if bit { 1.0 } else { 0.0 };
                count += bit as u64;
            }
            if count > 0 {
                let norm = (count as f64).sqrt();
                for v in row.iter_mut() {
                    *v /= norm;
                }
                break;
            }
        }
    }
    Ok(mat)
}

/// w = Φx with index-ascending summation.
pub fn measure(matrix: &Mat, x: &[f64]) -> Result<Vec<f64>> {
    matrix.matvec(x)
}

/// Passes w through the channel. Poisson rates of exactly zero yield zero
/// counts.
pub fn channel_sample(channel: &OutputChannel, w: &[f64], seed: u64) -> Result<Vec<f64>> {
    channel.validate()?;
    let mut rng = rng_from_seed(seed);
    match *channel {
        OutputChannel::Awgn { noise_variance } => {
            let noise = Normal::new(0.0, noise_variance.sqrt()).unwrap();
            Ok(w.iter().map(|wi| wi + noise.sample(&mut rng)).collect())
        }
        OutputChannel::Poisson { scaling } => {
            let mut y = Vec::with_capacity(w.len());
            for &wi in w {
                if wi < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "poisson channel requires nonnegative input, got {wi}"
                    )));
                }
                let rate = scaling * wi;
                if rate == 0.0 {
                    y.push(0.0);
                } else {
                    let pois = Poisson::new(rate)
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    y.push(pois.sample(&mut rng));
                }
            }
            Ok(y)
        }
    }
}

/// Log of the conditional density (AWGN) or pmf (Poisson) of y given w.
pub fn channel_log_likelihood(channel: &OutputChannel, y: f64, w: f64) -> Result<f64> {
    channel.validate()?;
    if !y.is_finite() || !w.is_finite() {
        return Err(Error::InvalidParameter("non-finite (y, w)".into()));
    }
    match *channel {
        OutputChannel::Awgn { noise_variance } => {
            let d = y - w;
            Ok(-0.5 * (LN_2PI + noise_variance.ln()) - 0.5 * d * d / noise_variance)
        }
        OutputChannel::Poisson { scaling } => {
            if w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "poisson channel input must be nonnegative, got {w}"
                )));
            }
            if y < 0.0 || y.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "poisson observation must be a nonnegative integer, got {y}"
                )));
            }
            let rate = scaling * w;
            if rate == 0.0 {
                return Ok(if y == 0.0 { 0.0 } else { f64::NEG_INFINITY });
            }
            Ok(y * rate.ln() - rate - ln_gamma(y + 1.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sparsity_gives_zero_vector() {
        let prior = SignalPrior::sparse_gaussian(0.0, 1.0).unwrap();
        let x = sample_signal(&prior, 5, 7).unwrap();
        assert_eq!(x, vec![0.0; 5]);
    }

    #[test]
    fn full_sparsity_draws_everything() {
        let prior = SignalPrior::sparse_gaussian(1.0, 1.0).unwrap();
        let x = sample_signal(&prior, 1000, 7).unwrap();
        assert!(x.iter().all(|v| *v != 0.0));
    }

    #[test]
    fn weibull_samples_nonnegative() {
        let prior = SignalPrior::sparse_weibull(1.0, 1.0, 0.5).unwrap();
        let x = sample_signal(&prior, 1000, 3).unwrap();
        assert!(x.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn matrix_rows_unit_norm_and_binary_support() {
        let mat = generate_matrix(100, 200, 11).unwrap();
        for i in 0..100 {
            let row = mat.row(i);
            let norm: f64 = row.iter().map(|v| v * v).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
            // entries pre-normalization in {0,1}: all nonzeros equal
            let nz: Vec<f64> = row.iter().copied().filter(|v| *v != 0.0).collect();
            assert!(nz.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-15));
        }
    }

    #[test]
    fn one_by_one_matrix_is_unit() {
        let mat = generate_matrix(1, 1, 0).unwrap();
        assert_eq!(mat.get(0, 0), 1.0);
    }

    #[test]
    fn measure_hand_arithmetic() {
        let s3 = 3.0f64.sqrt();
        let mat = Mat::from_rows(vec![vec![1.0 / s3, 0.0, 1.0 / s3, 1.0 / s3]]).unwrap();
        let w = measure(&mat, &[3.0, 9.0, 0.0, 3.0]).unwrap();
        assert!((w[0] - 6.0 / s3).abs() < 1e-14);
    }

    #[test]
    fn awgn_loglik_peak() {
        let ch = OutputChannel::Awgn { noise_variance: 0.25 };
        let got = channel_log_likelihood(&ch, 1.0, 1.0).unwrap();
        assert!((got + 0.5 * (LN_2PI + 0.25f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn poisson_loglik_zero_count() {
        let ch = OutputChannel::Poisson { scaling: 1.0 };
        let got = channel_log_likelihood(&ch, 0.0, 2.0).unwrap();
        assert!((got + 2.0).abs() < 1e-14);
    }

    #[test]
    fn poisson_rejects_negative_input() {
        let ch = OutputChannel::Poisson { scaling: 1.0 };
        assert!(channel_sample(&ch, &[-0.1], 0).is_err());
        assert!(channel_log_likelihood(&ch, 1.0, -0.1).is_err());
        assert!(channel_log_likelihood(&ch, 1.5, 0.1).is_err());
    }

    #[test]
    fn poisson_zero_rate_always_zero() {
        let ch = OutputChannel::Poisson { scaling: 100.0 };
        let y = channel_sample(&ch, &[0.0; 50], 9).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reproducible_instances() {
        let prior = SignalPrior::sparse_gaussian(0.25, 1.0).unwrap();
        let ch = OutputChannel::Awgn { noise_variance: 1e-3 };
        let a = ProblemInstance::generate(prior, ch, 20, 10, 42).unwrap();
        let b = ProblemInstance::generate(prior, ch, 20, 10, 42).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn weibull_prior_moments() {
        // k=1 is Exponential(1/λ): mean λ, second moment 2λ².
        let prior = SignalPrior::sparse_weibull(1.0, 2.0, 1.0).unwrap();
        assert!((prior.slab_mean() - 2.0).abs() < 1e-12);
        assert!((prior.slab_second_moment() - 8.0).abs() < 1e-12);
    }
}
