//! Stein's unbiased risk estimate for singular value soft-thresholding.
//!
//! For `X = M + E` with `E` iid `N(0, s^2)`,
//! `SURE(lambda) = -n p s^2 + sum_i min(lambda^2, sigma_i^2) + 2 s^2 div(lambda)`.
//! On each interval between consecutive singular values the risk is a
//! quadratic in `lambda`, so the minimizer is found exactly by checking the
//! breakpoints and the per-interval stationary points.

use crate::error::{invalid, Result};
use crate::linalg::{self, Matrix};

const GRID_POINTS: usize = 200;

fn tied(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale
}

/// Divergence of `X -> S(X, lambda)` from the singular values of `X`
/// (`min(n, p)` of them). At `lambda = 0` the map is the identity and every
/// singular value counts as above the cutoff, zero ones included.
pub fn divergence(sigma: &[f64], n: usize, p: usize, lambda: f64) -> f64 {
    let above = |s: f64| lambda == 0.0 || s > lambda;
    let gap = n.abs_diff(p) as f64;
    let scale = sigma.first().copied().unwrap_or(0.0);
    let mut shrink = 0.0;
    let mut count = 0.0;
    for &s in sigma {
        if above(s) {
            shrink += if lambda == 0.0 { 1.0 } else { 1.0 - lambda / s };
            count += 1.0;
        }
    }
    let f = |s: f64| if above(s) { s * (s - lambda) } else { 0.0 };
    let mut cross = 0.0;
    for i in 0..sigma.len() {
        for j in i + 1..sigma.len() {
            let (a, b) = (sigma[i], sigma[j]);
            cross += if tied(a, b, scale) {
                // f'(s) / (2 s), the limit of the pair quotient.
                if !above(a) {
                    0.0
                } else if a == 0.0 {
                    1.0
                } else {
                    (2.0 * a - lambda) / (2.0 * a)
                }
            } else {
                (f(a) - f(b)) / (a * a - b * b)
            };
        }
    }
    gap * shrink + count + 2.0 * cross
}

pub fn sure_risk(sigma: &[f64], n: usize, p: usize, noise_sd: f64, lambda: f64) -> f64 {
    let s2 = noise_sd * noise_sd;
    let fit: f64 = sigma.iter().map(|&s| (lambda * lambda).min(s * s)).sum();
    -((n * p) as f64) * s2 + fit + 2.0 * s2 * divergence(sigma, n, p, lambda)
}

/// Slope of the divergence on the open interval where exactly the first
/// `k` singular values exceed the cutoff.
fn divergence_slope(sigma: &[f64], n: usize, p: usize, k: usize) -> f64 {
    let gap = n.abs_diff(p) as f64;
    let scale = sigma.first().copied().unwrap_or(0.0);
    let mut slope = -gap * sigma[..k].iter().map(|s| 1.0 / s).sum::<f64>();
    for i in 0..k {
        for j in i + 1..sigma.len() {
            let (a, b) = (sigma[i], sigma[j]);
            slope -= 2.0
                * if j < k {
                    1.0 / (a + b)
                } else if tied(a, b, scale) {
                    1.0 / (2.0 * a)
                } else {
                    a / (a * a - b * b)
                };
        }
    }
    slope
}

/// Candidate cutoffs: zero, the singular values, their midpoints, the
/// per-interval stationary points and a uniform grid on `[0, sigma_max]`.
fn candidates(sigma: &[f64], n: usize, p: usize, noise_sd: f64) -> Vec<f64> {
    let top = sigma[0];
    let mut out = vec![0.0];
    out.extend(sigma.iter().copied());
    for w in sigma.windows(2) {
        out.push(0.5 * (w[0] + w[1]));
    }
    let s2 = noise_sd * noise_sd;
    for k in 1..=sigma.len() {
        let hi = sigma[k - 1];
        let lo = sigma.get(k).copied().unwrap_or(0.0);
        if hi <= lo {
            continue;
        }
        let stationary = -s2 * divergence_slope(sigma, n, p, k) / k as f64;
        out.push(stationary.clamp(lo, hi));
    }
    out.extend((0..=GRID_POINTS).map(|i| top * i as f64 / GRID_POINTS as f64));
    out.retain(|l| l.is_finite() && *l >= 0.0);
    out
}

/// SURE-minimizing cutoff from precomputed singular values. Ties go to the
/// smaller cutoff. Noiseless data (`noise_sd == 0`) gives a zero cutoff.
pub fn sure_lambda_from_singular_values(sigma: &[f64], n: usize, p: usize, noise_sd: f64) -> Result<f64> {
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(invalid(format!("noise level must be nonnegative and finite, got {noise_sd}")));
    }
    if noise_sd == 0.0 || sigma.first().is_none_or(|&s| s <= 0.0) {
        return Ok(0.0);
    }
    let mut best = (f64::INFINITY, 0.0);
    for l in candidates(sigma, n, p, noise_sd) {
        let r = sure_risk(sigma, n, p, noise_sd, l);
        if r < best.0 || (r == best.0 && l < best.1) {
            best = (r, l);
        }
    }
    Ok(best.1)
}

pub fn sure_lambda(x: &Matrix, noise_sd: f64) -> Result<f64> {
    let sigma = linalg::singular_values(x)?;
    sure_lambda_from_singular_values(&sigma, x.nrows(), x.ncols(), noise_sd)
}
