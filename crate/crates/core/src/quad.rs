//! Quadrature kernels used by the denoisers and the limit integrals.
//!
//! Three engines:
//! - Gauss-Hermite with order doubling, for Gaussian-weighted expectations
//!   of smooth integrands.
//! - Adaptive Simpson with forced interior knots, for truncated integrands
//!   with narrow peaks (Poisson likelihood windows, Weibull slabs).
//! - Adaptive panel-bisected Gauss-Legendre for the outer integrals over
//!   the scalar-channel output q.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

const SQRT_PI: f64 = 1.772453850905516;

fn hermite_cache() -> &'static Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes and weights for ∫ e^{-t²} g(t) dt with n points.
///
/// Newton iteration on the orthonormal Hermite recurrence; stable well past
/// the orders the doubling scheme ever asks for.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    if let Some(v) = hermite_cache().lock().unwrap().get(&n) {
        return v.clone();
    }
    let computed = compute_gauss_hermite(n);
    hermite_cache()
        .lock()
        .unwrap()
        .insert(n, computed.clone());
    computed
}

fn compute_gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let eps = 1e-14;
    let pim4 = 0.7511255444649425; // pi^(-1/4)
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= eps {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre_cache() -> &'static Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes and weights for ∫_{-1}^{1} g(t) dt with n points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if let Some(v) = legendre_cache().lock().unwrap().get(&n) {
        return v.clone();
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    let computed = (x, w);
    legendre_cache()
        .lock()
        .unwrap()
        .insert(n, computed.clone());
    computed
}

/// E[g(X)] for X ~ Normal(center, var), componentwise, by Gauss-Hermite with
/// order doubling (40, 80, ... 2560) until every component settles to
/// `rel_tol` relative change.
pub fn gauss_hermite_expect<const K: usize>(
    f: &dyn Fn(f64) -> [f64; K],
    center: f64,
    var: f64,
    rel_tol: f64,
) -> Result<[f64; K]> {
    let scale = (2.0 * var).sqrt();
    let mut prev: Option<[f64; K]> = None;
    let mut order = 40usize;
    let mut achieved = f64::INFINITY;
    while order <= 2560 {
        let (x, w) = gauss_hermite(order);
        let mut acc = [0.0; K];
        for (t, wt) in x.iter().zip(w.iter()) {
            let v = f(center + scale * t);
            for k in 0..K {
                acc[k] += wt * v[k];
            }
        }
        for a in acc.iter_mut() {
            *a /= SQRT_PI;
        }
        if let Some(p) = prev {
            achieved = (0..K)
                .map(|k| {
                    let denom = acc[k].abs().max(p[k].abs()).max(1e-300);
                    (acc[k] - p[k]).abs() / denom
                })
                .fold(0.0, f64::max);
            if achieved <= rel_tol {
                return Ok(acc);
            }
        }
        prev = Some(acc);
        order *= 2;
    }
    Err(Error::QuadratureNonConvergence {
        achieved,
        requested: rel_tol,
    })
}

/// Adaptive Simpson over `[knots[0], knots[last]]` with forced interior
/// knots, integrating a K-vector integrand in one pass.
///
/// The per-component absolute tolerance is seeded from a coarse composite
/// pass so narrow peaks inside a wide truncation window are found as long
/// as a forced knot lands near them.
pub fn adaptive_simpson<const K: usize>(
    f: &dyn Fn(f64) -> [f64; K],
    knots: &[f64],
    rel_tol: f64,
) -> Result<[f64; K]> {
    assert!(knots.len() >= 2);
    let mut scale = [0.0f64; K];
    // coarse pass: 8 sub-panels per knot interval
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / 8.0;
        for s in 0..8 {
            let (x0, x1) = (a + s as f64 * h, a + (s + 1) as f64 * h);
            let v0 = f(x0);
            let vm = f(0.5 * (x0 + x1));
            let v1 = f(x1);
            for k in 0..K {
                scale[k] += (x1 - x0) / 6.0 * (v0[k].abs() + 4.0 * vm[k].abs() + v1[k].abs());
            }
        }
    }
    let tol: [f64; K] = std::array::from_fn(|k| rel_tol * scale[k].max(1e-300));
    let mut acc = [0.0f64; K];
    let mut worst = 0.0f64;
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let fa = f(a);
        let fb = f(b);
        let m = 0.5 * (a + b);
        let fm = f(m);
        let whole = simpson_panel(a, b, &fa, &fm, &fb);
        let part = simpson_recurse(f, a, b, &fa, &fm, &fb, &whole, &tol, 40, &mut worst);
        for k in 0..K {
            acc[k] += part[k];
        }
    }
    // `worst` is the largest leftover error estimate from panels that hit
    // the depth cap, relative to the coarse scale.
    let achieved = (0..K)
        .map(|k| worst / scale[k].max(1e-300))
        .fold(0.0, f64::max);
    if achieved > rel_tol * 100.0 {
        return Err(Error::QuadratureNonConvergence {
            achieved,
            requested: rel_tol,
        });
    }
    Ok(acc)
}

fn simpson_panel<const K: usize>(a: f64, b: f64, fa: &[f64; K], fm: &[f64; K], fb: &[f64; K]) -> [f64; K] {
    std::array::from_fn(|k| (b - a) / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]))
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<const K: usize>(
    f: &dyn Fn(f64) -> [f64; K],
    a: f64,
    b: f64,
    fa: &[f64; K],
    fm: &[f64; K],
    fb: &[f64; K],
    whole: &[f64; K],
    tol: &[f64; K],
    depth: usize,
    worst: &mut f64,
) -> [f64; K] {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_panel(a, m, fa, &flm, fm);
    let right = simpson_panel(m, b, fm, &frm, fb);
    let mut ok = true;
    let mut err_max = 0.0f64;
    for k in 0..K {
        let err = (left[k] + right[k] - whole[k]) / 15.0;
        err_max = err_max.max(err.abs());
        if err.abs() > tol[k] {
            ok = false;
        }
    }
    // below this width the error estimate is dominated by rounding noise
    // that shrinks at the same rate as a halved tolerance would, so the
    // recursion must stop on width rather than on the estimate
    let too_narrow = b - a <= 1e-12 * (a.abs() + b.abs() + 1e-30);
    if ok || too_narrow || depth == 0 {
        if !ok {
            *worst = worst.max(err_max);
        }
        return std::array::from_fn(|k| left[k] + right[k] + (left[k] + right[k] - whole[k]) / 15.0);
    }
    let l = simpson_recurse(f, a, m, fa, &flm, fm, &left, tol, depth - 1, worst);
    let r = simpson_recurse(f, m, b, fm, &frm, fb, &right, tol, depth - 1, worst);
    std::array::from_fn(|k| l[k] + r[k])
}

/// Adaptive composite Gauss-Legendre over the panels delimited by `edges`,
/// bisecting any panel whose 16-point estimate disagrees with its halves.
pub fn adaptive_gauss_legendre(
    f: &(dyn Fn(f64) -> f64 + Sync),
    edges: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    assert!(edges.len() >= 2);
    let mut coarse = 0.0;
    let mut coarse_abs = 0.0;
    let mut panels = Vec::new();
    for seg in edges.windows(2) {
        if seg[1] <= seg[0] {
            continue;
        }
        let v = gl_panel(f, seg[0], seg[1]);
        coarse += v;
        coarse_abs += v.abs();
        panels.push((seg[0], seg[1], v));
    }
    let _ = coarse;
    let tol = rel_tol * coarse_abs.max(1e-300);
    let mut total = 0.0;
    let mut worst = 0.0f64;
    for (a, b, v) in panels {
        total += gl_recurse(f, a, b, v, tol / 2.0, 48, &mut worst);
    }
    if worst > tol * 100.0 {
        return Err(Error::QuadratureNonConvergence {
            achieved: worst / coarse_abs.max(1e-300),
            requested: rel_tol,
        });
    }
    Ok(total)
}

fn gl_panel(f: &(dyn Fn(f64) -> f64 + Sync), a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre(16);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (t, wt) in x.iter().zip(w.iter()) {
        acc += wt * f(c + h * t);
    }
    acc * h
}

fn gl_recurse(
    f: &(dyn Fn(f64) -> f64 + Sync),
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let (left, right) = rayon::join(|| gl_panel(f, a, m), || gl_panel(f, m, b));
    let err = left + right - whole;
    if err.abs() <= tol || depth == 0 {
        if err.abs() > tol {
            *worst = worst.max(err.abs());
        }
        return left + right;
    }
    let l = gl_recurse(f, a, m, left, tol / 2.0, depth - 1, worst);
    let r = gl_recurse(f, m, b, right, tol / 2.0, depth - 1, worst);
    l + r
}

/// Trapezoid rule on an arbitrary strictly increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    w[0] = 0.5 * (grid[1] - grid[0]);
    w[n - 1] = 0.5 * (grid[n - 1] - grid[n - 2]);
    for i in 1..n - 1 {
        w[i] = 0.5 * (grid[i + 1] - grid[i - 1]);
    }
    w
}
