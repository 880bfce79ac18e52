//! One-standard-error selection and consensus across splits.

use serde::{Deserialize, Serialize};

use crate::error::{HnnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSeSelection {
    pub index: usize,
    pub min_index: usize,
    #[serde(with = "super::nonfinite")]
    pub min_avg_err: f64,
    pub se_at_min: f64,
    pub threshold: f64,
}

pub fn average(fold_errors: &[f64; 4]) -> f64 {
    fold_errors.iter().sum::<f64>() / 4.0
}

/// `sqrt(1/4 * sum_{folds} (e - avg)^2 / 3)`.
pub fn standard_error(fold_errors: &[f64; 4]) -> f64 {
    let avg = average(fold_errors);
    let ss: f64 = fold_errors.iter().map(|e| (e - avg).powi(2)).sum();
    (0.25 * ss / 3.0).sqrt()
}

/// Among points with `avg_err <= min + SE(min)`, the smallest total rank;
/// ties go to the larger parameter sum, then the lexicographically smaller
/// point.
pub fn select_one_se(
    fold_errors: &[[f64; 4]],
    total_ranks: &[usize],
    points: &[Vec<f64>],
) -> Result<OneSeSelection> {
    if fold_errors.len() != total_ranks.len() || fold_errors.len() != points.len() {
        return Err(crate::error::mismatch("errors, ranks and points differ in length"));
    }
    let avg: Vec<f64> = fold_errors.iter().map(average).collect();
    let min_index = (0..avg.len())
        .filter(|&i| avg[i].is_finite())
        .min_by(|&a, &b| avg[a].total_cmp(&avg[b]))
        .ok_or_else(|| HnnError::Selection("no grid point has a finite BCV error".into()))?;
    let se = standard_error(&fold_errors[min_index]);
    let threshold = avg[min_index] + se;
    let sum = |i: usize| points[i].iter().sum::<f64>();
    let index = (0..avg.len())
        .filter(|&i| avg[i] <= threshold)
        .min_by(|&a, &b| {
            total_ranks[a]
                .cmp(&total_ranks[b])
                .then(sum(b).total_cmp(&sum(a)))
                .then_with(|| {
                    points[a]
                        .iter()
                        .zip(&points[b])
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        })
        .expect("the minimizing point satisfies its own threshold");
    Ok(OneSeSelection { index, min_index, min_avg_err: avg[min_index], se_at_min: se, threshold })
}

/// Index of the first entry whose key occurs most often.
pub fn modal_index<K: PartialEq>(keys: &[K]) -> Option<usize> {
    let counts: Vec<usize> = keys.iter().map(|k| keys.iter().filter(|o| *o == k).count()).collect();
    let best = *counts.iter().max()?;
    counts.iter().position(|&c| c == best)
}
