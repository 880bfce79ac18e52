//! Tuning grid over the level parameters.
//!
//! Each level gets the axis `{0} ∪ exp(linspace(-5, log max, m))`, where
//! `max` is the smallest parameter that shrinks every concatenation of that
//! level to zero on its own. Points are kept when they lie on or below the
//! hyperplane through the axis maxima, `sum_k c_k / max_k <= 1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hierarchy::ViewSet;
use crate::linalg;

use super::weights::SureWeights;

pub const DEFAULT_POINTS_PER_AXIS: usize = 10;
const LOG_START: f64 = -5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    /// Indexed by subset size minus one.
    pub maxima: Vec<f64>,
    pub axes: Vec<Vec<f64>>,
    /// Level parameters per retained point, ordered lexicographically by
    /// axis position with the full-set parameter varying fastest.
    pub points: Vec<Vec<f64>>,
}

impl TuningGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Runs of consecutive points that differ only in the last coordinate.
    pub fn chains(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.points.len() {
            let split = i == self.points.len() || {
                let k = self.points[i].len() - 1;
                self.points[i][..k] != self.points[start][..k]
            };
            if split {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(invalid("a tuning grid needs at least one point"));
        };
        let k = first.len();
        if points.iter().any(|p| p.len() != k || p.iter().any(|c| !(*c >= 0.0) || !c.is_finite())) {
            return Err(invalid("grid points need equal length and finite nonnegative coordinates"));
        }
        let maxima = (0..k).map(|i| points.iter().map(|p| p[i]).fold(0.0, f64::max)).collect();
        let axes = (0..k)
            .map(|i| {
                let mut a: Vec<f64> = points.iter().map(|p| p[i]).collect();
                a.sort_by(f64::total_cmp);
                a.dedup();
                a
            })
            .collect();
        Ok(TuningGrid { maxima, axes, points })
    }
}

/// `sum_k c_k / max_k`, with zero-maximum axes contributing nothing.
pub fn hyperplane_load(point: &[f64], maxima: &[f64]) -> f64 {
    point
        .iter()
        .zip(maxima)
        .map(|(c, m)| if *m > 0.0 { c / m } else { 0.0 })
        .sum()
}

pub fn level_maxima(data: &ViewSet, weights: &SureWeights) -> Result<Vec<f64>> {
    let d = data.len();
    let lattice = data.lattice();
    let mut maxima = vec![0.0; d];
    for s in lattice.iter() {
        let w = weights.weight(s);
        if w <= 0.0 {
            continue;
        }
        let top = linalg::singular_values(&data.concat(s)?)?.first().copied().unwrap_or(0.0);
        let k = s.len() - 1;
        maxima[k] = f64::max(maxima[k], top / w);
    }
    Ok(maxima)
}

pub fn log_axis(max: f64, points: usize) -> Vec<f64> {
    let mut axis = vec![0.0];
    if max <= 0.0 {
        return axis;
    }
    let hi = max.ln();
    for i in 0..points {
        let t = if points == 1 { 1.0 } else { i as f64 / (points - 1) as f64 };
        axis.push((LOG_START + t * (hi - LOG_START)).exp());
    }
    *axis.last_mut().expect("non-empty") = max;
    axis
}

pub fn build_grid(data: &ViewSet, weights: &SureWeights, points_per_axis: usize) -> Result<TuningGrid> {
    if points_per_axis < 2 {
        return Err(invalid(format!("points_per_axis must be at least 2, got {points_per_axis}")));
    }
    if weights.views != data.len() {
        return Err(invalid("weights were computed for a different number of views"));
    }
    let maxima = level_maxima(data, weights)?;
    let axes: Vec<Vec<f64>> = maxima.iter().map(|&m| log_axis(m, points_per_axis)).collect();
    let mut points = Vec::new();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let point: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        if hyperplane_load(&point, &maxima) <= 1.0 {
            points.push(point);
        }
        let mut k = axes.len();
        loop {
            if k == 0 {
                return Ok(TuningGrid { maxima, axes, points });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}
