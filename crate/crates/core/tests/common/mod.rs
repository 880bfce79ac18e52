#![allow(dead_code)]

pub mod properties;

use hnn::hierarchy::{PenaltySpec, Subset, ViewSet};
use hnn::linalg::{hcat, soft_threshold_svd, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn low_rank(n: usize, p: usize, r: usize, rng: &mut ChaCha8Rng) -> Matrix {
    gaussian(n, r, rng) * gaussian(r, p, rng)
}

pub fn views(n: usize, p: &[usize], rng: &mut ChaCha8Rng) -> ViewSet {
    ViewSet::new(p.iter().map(|&pd| gaussian(n, pd, rng)).collect()).unwrap()
}

/// `1/2 sum ||X_d - M_d||^2 + sum_S lambda_S ||M_S||_*`, computed from the
/// definition.
pub fn reference_objective(x: &[Matrix], m: &[Matrix], spec: &PenaltySpec) -> f64 {
    let fit: f64 = x.iter().zip(m).map(|(a, b)| (a - b).norm_squared()).sum::<f64>() / 2.0;
    let pen: f64 = spec
        .iter()
        .filter(|(_, l)| *l > 0.0)
        .map(|(s, l)| l * nuclear(&block(m, s)))
        .sum();
    fit + pen
}

fn nuclear(a: &Matrix) -> f64 {
    a.clone().svd(false, false).singular_values.iter().sum()
}

fn block(m: &[Matrix], s: Subset) -> Matrix {
    let parts: Vec<&Matrix> = s.indices().into_iter().map(|d| &m[d]).collect();
    hcat(&parts).unwrap()
}

/// Consensus ADMM for the HNN problem.
///
/// Each penalized subset `S` gets a copy `Z_S` of the concatenation `M_S`,
/// with scaled dual `U_S`. The `M` step is a weighted average per view, the
/// `Z` step a singular value soft-threshold.
pub fn admm_reference(x: &[Matrix], spec: &PenaltySpec, rho: f64, max_iters: usize, tol: f64) -> Vec<Matrix> {
    let active: Vec<(Subset, f64)> = spec.iter().filter(|(_, l)| *l > 0.0).collect();
    let cols: Vec<usize> = x.iter().map(|v| v.ncols()).collect();
    let split = |s: Subset, z: &Matrix| -> Vec<(usize, Matrix)> {
        let mut off = 0;
        s.indices()
            .into_iter()
            .map(|d| {
                let piece = z.columns(off, cols[d]).into_owned();
                off += cols[d];
                (d, piece)
            })
            .collect()
    };
    let mut m: Vec<Matrix> = x.to_vec();
    let mut z: Vec<Matrix> = active.iter().map(|&(s, _)| block(&m, s)).collect();
    let mut u: Vec<Matrix> = z.iter().map(|b| Matrix::zeros(b.nrows(), b.ncols())).collect();
    let counts: Vec<f64> = (0..x.len()).map(|d| active.iter().filter(|(s, _)| s.contains(d)).count() as f64).collect();
    for _ in 0..max_iters {
        let mut acc: Vec<Matrix> = x.to_vec();
        for (k, &(s, _)) in active.iter().enumerate() {
            let target = &z[k] - &u[k];
            for (d, piece) in split(s, &target) {
                acc[d] += piece * rho;
            }
        }
        for d in 0..x.len() {
            m[d] = &acc[d] / (1.0 + rho * counts[d]);
        }
        let mut primal = 0.0f64;
        let mut dual = 0.0f64;
        for (k, &(s, l)) in active.iter().enumerate() {
            let ms = block(&m, s);
            let z_new = soft_threshold_svd(&(&ms + &u[k]), l / rho).unwrap();
            dual = dual.max(rho * (&z_new - &z[k]).norm());
            z[k] = z_new;
            let r = &ms - &z[k];
            primal = primal.max(r.norm());
            u[k] += r;
        }
        if primal < tol && dual < tol {
            break;
        }
    }
    m
}
