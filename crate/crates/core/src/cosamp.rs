//! CoSaMP greedy recovery, used as a reference point for the
//! posterior-based estimators. Linear/AWGN measurements only.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mat::{norm2, Mat};
use crate::model::{OutputChannel, ProblemInstance};

#[derive(Clone, Debug)]
pub struct CosampConfig {
    pub sparsity_k: usize,
    pub max_iterations: usize,
    pub halting_tolerance: f64,
}

impl CosampConfig {
    pub fn new(sparsity_k: usize) -> Self {
        CosampConfig {
            sparsity_k,
            max_iterations: 50,
            halting_tolerance: 1e-6,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.sparsity_k == 0 || self.sparsity_k > n {
            return Err(Error::InvalidParameter(format!(
                "sparsity_k must lie in 1..={n}, got {}",
                self.sparsity_k
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        if !(self.halting_tolerance.is_finite() && self.halting_tolerance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "halting_tolerance must be a nonnegative real, got {}",
                self.halting_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CosampResult {
    pub estimate: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// True when any least-squares solve hit rank deficiency and fell back
    /// to a ridge-regularized system.
    pub ridge_applied: bool,
}

/// Standard CoSaMP: proxy = Φᵀr, take the 2k largest-magnitude proxy
/// entries, merge with the current support, least-squares on the merged
/// support, prune to the k largest, repeat. Deterministic; the residual
/// norm never increases (the iteration keeps the best iterate seen).
pub fn cosamp(y: &[f64], phi: &Mat, config: &CosampConfig) -> Result<CosampResult> {
    let m = phi.rows();
    let n = phi.cols();
    config.validate(n)?;
    if y.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "y has length {}, matrix has {} rows",
            y.len(),
            m
        )));
    }
    let k = config.sparsity_k;

    let mut x = vec![0.0; n];
    let mut residual = y.to_vec();
    let mut res_norm = norm2(&residual);
    let mut support: Vec<usize> = Vec::new();
    let mut ridge_applied = false;
    let mut iterations = 0;

    if res_norm == 0.0 {
        return Ok(CosampResult {
            estimate: x,
            iterations,
            residual_norm: 0.0,
            ridge_applied,
        });
    }

    for iter in 0..config.max_iterations {
        iterations = iter + 1;

        // signal proxy and candidate support
        let proxy = phi.t_matvec(&residual)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            proxy[b]
                .abs()
                .partial_cmp(&proxy[a].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut merged: Vec<usize> = order[..(2 * k).min(n)].to_vec();
        merged.extend_from_slice(&support);
        merged.sort_unstable();
        merged.dedup();

        // least squares on the merged support
        let (coeffs, ridged) = least_squares_on_support(y, phi, &merged)?;
        ridge_applied |= ridged;

        // prune to the k largest coefficients
        let mut by_mag: Vec<usize> = (0..merged.len()).collect();
        by_mag.sort_by(|&a, &b| {
            coeffs[b]
                .abs()
                .partial_cmp(&coeffs[a].abs())
                .unwrap()
                .then(merged[a].cmp(&merged[b]))
        });
        let mut new_support: Vec<usize> = by_mag[..k.min(merged.len())]
            .iter()
            .map(|&i| merged[i])
            .collect();
        new_support.sort_unstable();

        // re-fit on the pruned support so the residual is the true LS residual
        let (pruned_coeffs, ridged2) = least_squares_on_support(y, phi, &new_support)?;
        ridge_applied |= ridged2;
        let mut new_x = vec![0.0; n];
        for (idx, &j) in new_support.iter().enumerate() {
            new_x[j] = pruned_coeffs[idx];
        }

        let fitted = phi.matvec(&new_x)?;
        let new_residual: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
        let new_norm = norm2(&new_residual);

        if new_norm > res_norm + 1e-10 * res_norm.max(1.0) {
            // the step made things worse; keep the previous iterate
            iterations = iter;
            break;
        }

        let rel_change = (res_norm - new_norm).abs() / res_norm.max(1e-300);
        x = new_x;
        support = new_support;
        residual = new_residual;
        res_norm = new_norm;

        if res_norm < 1e-12 || rel_change < config.halting_tolerance {
            break;
        }
    }

    Ok(CosampResult {
        estimate: x,
        iterations,
        residual_norm: res_norm,
        ridge_applied,
    })
}

/// Runs CoSaMP on a generated instance. Poisson instances are refused:
/// the observations are not linear measurements of the signal.
pub fn cosamp_for_instance(
    instance: &ProblemInstance,
    config: &CosampConfig,
) -> Result<CosampResult> {
    match instance.channel {
        OutputChannel::Awgn { .. } => cosamp(&instance.y, &instance.matrix, config),
        OutputChannel::Poisson { .. } => Err(Error::ChannelUnsupported(
            "cosamp requires linear AWGN measurements; Poisson observations are unsupported"
                .into(),
        )),
    }
}

/// Least squares of y against the columns of Φ restricted to `support`.
/// Rank deficiency falls back to normal equations with ridge 1e-12 and is
/// reported to the caller.
fn least_squares_on_support(y: &[f64], phi: &Mat, support: &[usize]) -> Result<(Vec<f64>, bool)> {
    if support.is_empty() {
        return Ok((Vec::new(), false));
    }
    let m = phi.rows();
    let s = support.len();
    let mut a = DMatrix::<f64>::zeros(m, s);
    for (c, &j) in support.iter().enumerate() {
        for r in 0..m {
            a[(r, c)] = phi.get(r, j);
        }
    }
    let b = DVector::from_column_slice(y);

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax > 0.0 && smin > 1e-10 * smax {
        let sol = svd
            .solve(&b, 0.0)
            .map_err(|e| Error::InvalidParameter(format!("least-squares solve failed: {e}")))?;
        return Ok((sol.as_slice().to_vec(), false));
    }

    // rank-deficient: ridge-regularized normal equations
    let mut gram = a.transpose() * &a;
    for i in 0..s {
        gram[(i, i)] += 1e-12;
    }
    let rhs = a.transpose() * &b;
    let sol = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("ridge-regularized solve failed".into()))?;
    Ok((sol.as_slice().to_vec(), true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_matrix, measure};

    #[test]
    fn zero_input_gives_zero_estimate() {
        let phi = generate_matrix(8, 16, 7).unwrap();
        let out = cosamp(&vec![0.0; 8], &phi, &CosampConfig::new(3)).unwrap();
        assert_eq!(out.estimate, vec![0.0; 16]);
        assert_eq!(out.residual_norm, 0.0);
    }

    #[test]
    fn noiseless_square_system_recovers_exactly() {
        let n = 32;
        let phi = generate_matrix(n, n, 11).unwrap();
        let mut x = vec![0.0; n];
        x[3] = 1.7;
        x[10] = -0.4;
        x[25] = 2.2;
        let y = measure(&phi, &x).unwrap();
        let out = cosamp(&y, &phi, &CosampConfig::new(3)).unwrap();
        assert!(out.residual_norm < 1e-8, "residual = {}", out.residual_norm);
        for j in 0..n {
            assert!((out.estimate[j] - x[j]).abs() < 1e-6, "j={j}");
        }
    }

    #[test]
    fn support_size_never_exceeds_k() {
        let phi = generate_matrix(20, 60, 3).unwrap();
        let mut x = vec![0.0; 60];
        for (j, v) in [(5, 1.0), (17, -2.0), (40, 0.7), (59, 1.2)] {
            x[j] = v;
        }
        let y = measure(&phi, &x).unwrap();
        let out = cosamp(&y, &phi, &CosampConfig::new(4)).unwrap();
        let nnz = out.estimate.iter().filter(|v| **v != 0.0).count();
        assert!(nnz <= 4, "support size {nnz}");
    }

    #[test]
    fn poisson_instance_rejected() {
        let prior = crate::model::SignalPrior::sparse_weibull(0.03, 1.0, 0.5).unwrap();
        let instance =
            ProblemInstance::generate(prior, OutputChannel::Poisson { scaling: 100.0 }, 64, 32, 42)
                .unwrap();
        let err = cosamp_for_instance(&instance, &CosampConfig::new(2)).unwrap_err();
        assert!(matches!(err, Error::ChannelUnsupported(_)));
    }

    #[test]
    fn invalid_config_rejected() {
        let phi = generate_matrix(4, 8, 1).unwrap();
        assert!(cosamp(&vec![0.0; 4], &phi, &CosampConfig::new(0)).is_err());
        assert!(cosamp(&vec![0.0; 4], &phi, &CosampConfig::new(9)).is_err());
    }

    #[test]
    fn deterministic_across_calls() {
        let phi = generate_matrix(24, 48, 5).unwrap();
        let mut x = vec![0.0; 48];
        x[1] = 1.0;
        x[30] = -1.5;
        let y = measure(&phi, &x).unwrap();
        let a = cosamp(&y, &phi, &CosampConfig::new(2)).unwrap();
        let b = cosamp(&y, &phi, &CosampConfig::new(2)).unwrap();
        assert_eq!(a.estimate, b.estimate);
    }
}
