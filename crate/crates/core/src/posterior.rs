//! Per-component posterior of x given the scalar-channel output q.
//!
//! The law is mixed: a point mass at zero (the spike) plus a continuous
//! part tabulated on a strictly increasing grid. The pair is normalized
//! jointly so zero_mass + quadrature(density) = 1.

use crate::error::{Error, Result};
use crate::gamp::slab_branch_moments;
use crate::model::{SignalPrior, Slab, LN_2PI};
use crate::quad::trapezoid_weights;

pub const GRID_POINTS: usize = 4096;

#[derive(Debug, Clone)]
pub struct MixedPosterior {
    pub zero_mass: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    weights: Vec<f64>,
    /// weights[i] * density[i], cached for the estimator inner loops.
    wd: Vec<f64>,
}

impl MixedPosterior {
    pub fn continuous_mass(&self) -> f64 {
        self.wd.iter().sum()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weighted_density(&self) -> &[f64] {
        &self.wd
    }

    pub fn span(&self) -> f64 {
        if self.grid.is_empty() {
            0.0
        } else {
            self.grid[self.grid.len() - 1] - self.grid[0]
        }
    }

    /// zero_mass·f(0) + ∫ f dP over the continuous part.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = self.zero_mass * f(0.0);
        for (x, w) in self.grid.iter().zip(self.wd.iter()) {
            acc += w * f(*x);
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.grid.iter().zip(self.wd.iter()) {
            acc += w * x;
        }
        acc
    }

    /// Quantile by scanning the mixed CDF; within a grid panel the density
    /// is treated as linear and the crossing bisected to 1e-12·span.
    pub fn quantile(&self, target: f64) -> f64 {
        let n = self.grid.len();
        let mut cum = 0.0;
        let mut atom_used = false;
        // masses: panel masses between nodes, atom inserted when passing 0
        let mut prev_x = f64::NEG_INFINITY;
        for i in 0..n.saturating_sub(1) {
            let (x0, x1) = (self.grid[i], self.grid[i + 1]);
            // atom before this panel?
            if !atom_used && prev_x < 0.0 && x0 >= 0.0 {
                if cum + self.zero_mass >= target {
                    return 0.0;
                }
                cum += self.zero_mass;
                atom_used = true;
            }
            let h = x1 - x0;
            let (d0, d1) = (self.density[i], self.density[i + 1]);
            let mut panel = 0.5 * h * (d0 + d1);
            // atom inside the panel?
            if !atom_used && x0 < 0.0 && x1 >= 0.0 {
                let left = partial_panel_mass(x0, x1, d0, d1, 0.0);
                if cum + left + self.zero_mass >= target && cum + left <= target {
                    return 0.0;
                }
                if cum + left > target {
                    // crossing inside the left sub-panel
                    return bisect_panel(x0, x1, d0, d1, cum, target, self.span());
                }
                cum += self.zero_mass;
                atom_used = true;
                panel -= 0.0; // full panel mass still pending below
                if cum + left <= target && cum + panel >= target {
                    // crossing in this panel (right of the atom): bisect with
                    // the atom folded into cum
                    return bisect_panel(x0, x1, d0, d1, cum, target, self.span());
                }
                cum += panel;
                prev_x = x1;
                continue;
            }
            if cum + panel >= target {
                return bisect_panel(x0, x1, d0, d1, cum, target, self.span());
            }
            cum += panel;
            prev_x = x1;
        }
        if !atom_used && cum + self.zero_mass >= target {
            return 0.0;
        }
        *self.grid.last().unwrap_or(&0.0)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

fn partial_panel_mass(x0: f64, x1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = x1 - x0;
    let u = (t - x0) / h;
    let dt = d0 + (d1 - d0) * u;
    0.5 * (t - x0) * (d0 + dt)
}

fn bisect_panel(x0: f64, x1: f64, d0: f64, d1: f64, cum: f64, target: f64, span: f64) -> f64 {
    let mut lo = x0;
    let mut hi = x1;
    let tol = 1e-12 * span.max(1e-300);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if cum + partial_panel_mass(x0, x1, d0, d1, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn log_normal_pdf(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * x * x / var
}

/// Exact conditional law of x given q under q = x + Normal(0, μ).
pub fn posterior(prior: &SignalPrior, q: f64, mu: f64) -> Result<MixedPosterior> {
    Ok(posterior_with_evidence(prior, q, mu)?.0)
}

/// Same, also returning the marginal density f_Q(q).
pub fn posterior_with_evidence(
    prior: &SignalPrior,
    q: f64,
    mu: f64,
) -> Result<(MixedPosterior, f64)> {
    if !q.is_finite() || !mu.is_finite() || mu <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "posterior needs finite q and positive mu, got q={q}, mu={mu}"
        )));
    }
    prior.validate()?;
    let p = prior.sparsity;

    if p == 0.0 {
        let grid = vec![-1.0, 1.0];
        let density = vec![0.0, 0.0];
        let weights = trapezoid_weights(&grid);
        let evidence = log_normal_pdf(q, mu).exp();
        return Ok((
            MixedPosterior {
                zero_mass: 1.0,
                grid,
                density,
                wd: vec![0.0, 0.0],
                weights,
            },
            evidence,
        ));
    }

    let (log_m0, mean_b, ex2_b) = slab_branch_moments(prior, q, mu)?;
    let var_b = (ex2_b - mean_b * mean_b).max(mu * 1e-12);
    let sd_b = var_b.sqrt();

    let log_spike = if p < 1.0 {
        (1.0 - p).ln() + log_normal_pdf(q, mu)
    } else {
        f64::NEG_INFINITY
    };
    let log_slab = if log_m0.is_finite() {
        p.ln() + log_m0
    } else {
        f64::NEG_INFINITY
    };
    let zero_mass = if p == 1.0 {
        0.0
    } else if !log_slab.is_finite() {
        1.0
    } else {
        1.0 / (1.0 + (log_slab - log_spike).exp())
    };
    let lmax = log_spike.max(log_slab);
    let evidence = if lmax.is_finite() {
        (lmax + ((log_spike - lmax).exp() + (log_slab - lmax).exp()).ln()).exp()
    } else {
        0.0
    };

    let grid = build_grid(prior, mean_b, sd_b);
    let log_dens_at = |x: f64| prior.slab_log_density(x) + log_normal_pdf(q - x, mu);
    let mut lpeak = f64::NEG_INFINITY;
    let raw_log: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let l = log_dens_at(x);
            if l > lpeak {
                lpeak = l;
            }
            l
        })
        .collect();
    let mut density: Vec<f64> = if lpeak.is_finite() {
        raw_log
            .iter()
            .map(|l| {
                let d = l - lpeak;
                if d < -700.0 {
                    0.0
                } else {
                    d.exp()
                }
            })
            .collect()
    } else {
        vec![0.0; grid.len()]
    };
    let weights = trapezoid_weights(&grid);
    let raw_mass: f64 = weights.iter().zip(&density).map(|(w, d)| w * d).sum();
    let target_mass = 1.0 - zero_mass;
    if raw_mass > 0.0 && target_mass > 0.0 {
        let scale = target_mass / raw_mass;
        for d in density.iter_mut() {
            *d *= scale;
        }
    } else {
        for d in density.iter_mut() {
            *d = 0.0;
        }
    }
    let wd: Vec<f64> = weights.iter().zip(&density).map(|(w, d)| w * d).collect();
    let zero_mass = if raw_mass > 0.0 { zero_mass } else { 1.0 };

    Ok((
        MixedPosterior {
            zero_mass,
            grid,
            density,
            weights,
            wd,
        },
        evidence,
    ))
}

/// Grid over the slab branch's mean ± 8 standard deviations. For Weibull
/// slabs with k < 1 whose window reaches the origin, the points are
/// clustered toward 0 through the u = (x/λ)^k substitution so the density
/// singularity stays integrable under the trapezoid rule.
fn build_grid(prior: &SignalPrior, mean_b: f64, sd_b: f64) -> Vec<f64> {
    let n = GRID_POINTS;
    let lo = mean_b - 8.0 * sd_b;
    let hi = mean_b + 8.0 * sd_b;
    let mut grid: Vec<f64> = match prior.slab {
        Slab::Gaussian { .. } => uniform_grid(lo, hi, n),
        Slab::Weibull { lambda, shape } => {
            let hi = hi.max(lambda * 1e-9);
            if lo > lambda * 1e-12 {
                uniform_grid(lo, hi, n)
            } else {
                let u_hi = (hi / lambda).powf(shape);
                let du = u_hi / n as f64;
                (1..=n)
                    .map(|i| lambda * (i as f64 * du).powf(1.0 / shape))
                    .collect()
            }
        }
    };
    // keep the atom separate from the grid: no abscissa exactly at zero
    let span = grid[n - 1] - grid[0];
    for g in grid.iter_mut() {
        if *g == 0.0 {
            *g = 1e-12 * span.max(1e-300);
        }
    }
    grid.dedup();
    grid
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sparsity_is_pure_atom() {
        let prior = SignalPrior::sparse_gaussian(0.0, 1.0).unwrap();
        let post = posterior(&prior, 0.7, 0.1).unwrap();
        assert_eq!(post.zero_mass, 1.0);
        assert_eq!(post.continuous_mass(), 0.0);
    }

    #[test]
    fn full_sparsity_has_no_atom() {
        let prior = SignalPrior::sparse_gaussian(1.0, 1.0).unwrap();
        let post = posterior(&prior, 0.7, 0.1).unwrap();
        assert_eq!(post.zero_mass, 0.0);
        assert!((post.continuous_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_mass_matches_closed_form_at_q_zero() {
        // π₀ at q=0: ratio ((1−p)/p)√(σ²/μ+1) / (1 + same)
        let (p, sigma2, mu) = (0.03, 1.0, 0.01);
        let prior = SignalPrior::sparse_gaussian(p, sigma2).unwrap();
        let post = posterior(&prior, 0.0, mu).unwrap();
        let ratio = ((1.0 - p) / p) * (sigma2 / mu + 1.0f64).sqrt();
        let expected = ratio / (1.0 + ratio);
        assert!((post.zero_mass - expected).abs() < 1e-12);
    }

    #[test]
    fn normalization_identity() {
        for (prior, q, mu) in [
            (SignalPrior::sparse_gaussian(0.03, 1.0).unwrap(), 0.3, 0.01),
            (SignalPrior::sparse_gaussian(0.5, 2.0).unwrap(), -1.5, 0.2),
            (SignalPrior::sparse_weibull(0.3, 1.0, 0.5).unwrap(), 0.8, 0.05),
            (SignalPrior::sparse_weibull(0.3, 1.0, 2.0).unwrap(), 1.2, 0.1),
        ] {
            let post = posterior(&prior, q, mu).unwrap();
            let total = post.zero_mass + post.continuous_mass();
            assert!((total - 1.0).abs() < 1e-10, "total = {total}");
        }
    }

    #[test]
    fn median_of_symmetric_posterior_is_mean() {
        let prior = SignalPrior::sparse_gaussian(1.0, 1.0).unwrap();
        let post = posterior(&prior, 0.8, 0.2).unwrap();
        let expected = 0.8 * 1.0 / 1.2;
        assert!((post.median() - expected).abs() < 1e-8);
        assert!((post.mean() - expected).abs() < 1e-10);
    }

    #[test]
    fn heavy_atom_median_is_zero() {
        let prior = SignalPrior::sparse_gaussian(0.03, 1.0).unwrap();
        let post = posterior(&prior, 0.1, 0.01).unwrap();
        assert!(post.zero_mass > 0.5);
        assert_eq!(post.median(), 0.0);
    }
}
