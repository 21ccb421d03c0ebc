#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use csmet::ProblemInstance;

const LN_2PI: f64 = 1.8378770664093453;

/// Exact Bayes posterior mean of a spike-and-slab Gaussian signal under
/// AWGN, by exhaustive enumeration of all 2^N supports. For support S,
/// y | S ~ Normal(0, σ²·A_S·A_Sᵀ + σn²·I), the conditional mean of x_S is
/// σ²·A_Sᵀ·Σ_S⁻¹·y, and supports are weighted by p^|S|(1−p)^(N−|S|) times
/// the marginal likelihood. Only feasible for small N.
pub fn exact_posterior_mean(
    instance: &ProblemInstance,
    sigma2: f64,
    noise_variance: f64,
) -> Vec<f64> {
    let n = instance.x.len();
    let m = instance.y.len();
    assert!(n <= 20, "support enumeration is exponential in N");
    let p = instance.prior.sparsity;
    let a = DMatrix::from_fn(m, n, |i, j| instance.matrix.get(i, j));
    let y = DVector::from_column_slice(&instance.y);

    let mut log_weights = Vec::with_capacity(1usize << n);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(1usize << n);
    for mask in 0u32..(1u32 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        let k = cols.len();
        let a_s = a.select_columns(cols.iter());
        let cov = DMatrix::identity(m, m) * noise_variance + sigma2 * &a_s * a_s.transpose();
        let chol = cov
            .cholesky()
            .expect("support covariance must be positive definite");
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let alpha = chol.solve(&y);
        let log_lik = -0.5 * (m as f64 * LN_2PI + log_det + y.dot(&alpha));
        log_weights.push(k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln() + log_lik);

        let mean_s = sigma2 * a_s.transpose() * &alpha;
        let mut full = vec![0.0; n];
        for (idx, &j) in cols.iter().enumerate() {
            full[j] = mean_s[idx];
        }
        means.push(full);
    }

    let max_lw = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut acc = vec![0.0; n];
    for (lw, mean) in log_weights.iter().zip(&means) {
        let w = (lw - max_lw).exp();
        z += w;
        for (a, b) in acc.iter_mut().zip(mean) {
            *a += w * b;
        }
    }
    for v in &mut acc {
        *v /= z;
    }
    acc
}

/// ‖a − b‖² / ‖b‖².
pub fn nmse(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    num / den
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0).max(1.0);
    (mean, (var / k).sqrt())
}
