//! Penalty selection: SURE weights within levels, a grid over the level
//! parameters, 2x2 bi-cross-validation and the one-standard-error rule.

pub mod bcv;
pub mod grid;
pub mod select;
pub mod sure;
pub mod weights;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hierarchy::ViewSet;
use crate::refit::{refit, RefitResult};
use crate::solver::{fit_hnn_warm, FitResult, SolverConfig};

pub use bcv::{bcv_errors, bcv_evaluate, bcv_split, full_data_ranks, BcvErrors, BcvReport, BcvSplit, PointRanks};
pub use grid::{build_grid, hyperplane_load, level_maxima, TuningGrid, DEFAULT_POINTS_PER_AXIS};
pub use select::{select_one_se, OneSeSelection};
pub use sure::{divergence, sure_lambda, sure_risk};
pub use weights::{compute_weights, estimate_noise, SureWeights};

/// Serde for error values that may be `+inf`: non-finite numbers are written
/// as `null` and read back as `+inf`.
pub(crate) mod nonfinite {
    use serde::de::DeserializeOwned;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub trait Lossless: Sized {
        type Repr: Serialize + DeserializeOwned;
        fn to_repr(&self) -> Self::Repr;
        fn from_repr(r: Self::Repr) -> Self;
    }

    impl Lossless for f64 {
        type Repr = Option<f64>;
        fn to_repr(&self) -> Option<f64> {
            self.is_finite().then_some(*self)
        }
        fn from_repr(r: Option<f64>) -> f64 {
            r.unwrap_or(f64::INFINITY)
        }
    }

    impl<T: Lossless> Lossless for Vec<T> {
        type Repr = Vec<T::Repr>;
        fn to_repr(&self) -> Self::Repr {
            self.iter().map(T::to_repr).collect()
        }
        fn from_repr(r: Self::Repr) -> Self {
            r.into_iter().map(T::from_repr).collect()
        }
    }

    impl<T: Lossless> Lossless for [T; 4] {
        type Repr = Vec<T::Repr>;
        fn to_repr(&self) -> Self::Repr {
            self.iter().map(T::to_repr).collect()
        }
        fn from_repr(r: Self::Repr) -> Self {
            let v: Vec<T> = r.into_iter().map(T::from_repr).collect();
            v.try_into().unwrap_or_else(|_| panic!("expected four fold entries"))
        }
    }

    pub fn serialize<T: Lossless, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        v.to_repr().serialize(s)
    }

    pub fn deserialize<'de, T: Lossless, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        T::Repr::deserialize(d).map(T::from_repr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    pub points_per_axis: usize,
    pub n_splits: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Explicit parameter points replacing the generated grid.
    pub grid: Option<Vec<Vec<f64>>>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            points_per_axis: DEFAULT_POINTS_PER_AXIS,
            n_splits: 1,
            seed: 0,
            solver: SolverConfig::default(),
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consensus {
    pub split_seeds: Vec<u64>,
    pub selected_indices: Vec<usize>,
    pub selected_ranks: Vec<PointRanks>,
    /// Split whose selection carries the most frequent rank pattern, the
    /// earliest one on ties.
    pub chosen_split: usize,
    pub point_index: usize,
    pub point: Vec<f64>,
    pub ranks: PointRanks,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub weights: SureWeights,
    pub grid: TuningGrid,
    pub reports: Vec<BcvReport>,
    pub consensus: Consensus,
    pub fit: FitResult,
    pub refit: RefitResult,
}

/// Split `r` uses seed `seed + r`.
pub fn split_seeds(seed: u64, n_splits: usize) -> Vec<u64> {
    (0..n_splits as u64).map(|r| seed.wrapping_add(r)).collect()
}

/// Weights, grid, one or more BCV splits, consensus, and the final fit and
/// refit on the full data at the consensus point.
pub fn tune(data: &ViewSet, config: &TuneConfig) -> Result<TuneResult> {
    if config.n_splits == 0 {
        return Err(invalid("n_splits must be at least 1"));
    }
    config.solver.validate()?;
    let weights = compute_weights(data, &estimate_noise(data)?)?;
    let grid = match &config.grid {
        Some(points) => {
            if points.iter().any(|p| p.len() != data.len()) {
                return Err(invalid(format!("grid points need {} coordinates", data.len())));
            }
            TuningGrid::from_points(points.clone())?
        }
        None => build_grid(data, &weights, config.points_per_axis)?,
    };
    log::info!("tuning over {} grid points with {} split(s)", grid.len(), config.n_splits);
    let ranks = full_data_ranks(data, &grid, &weights, &config.solver)?;
    let seeds = split_seeds(config.seed, config.n_splits);
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let split = bcv_split(data, seed)?;
        let errors = bcv_errors(data, &split, &grid, &weights, &config.solver)?;
        let report = BcvReport::assemble(split, &grid, errors, ranks.clone())?;
        log::info!(
            "split seed {seed}: selected {:?} with total rank {}",
            report.selected_point,
            report.selected_total_rank
        );
        reports.push(report);
    }
    let indices: Vec<usize> = reports.iter().map(|r| r.selection.index).collect();
    let selected_ranks: Vec<PointRanks> = indices.iter().map(|&i| ranks[i].clone()).collect();
    let keys: Vec<(usize, &[usize])> = selected_ranks.iter().map(|r| (r.total, r.per_view.as_slice())).collect();
    let chosen = select::modal_index(&keys).expect("at least one split");
    let point_index = indices[chosen];
    let point = grid.points[point_index].clone();
    // Replay the warm-started chain up to the selected point.
    let chain = grid.chains().into_iter().find(|c| c.contains(&point_index)).expect("every point lies on a chain");
    let mut state = None;
    let mut fit = None;
    for i in chain.start..=point_index {
        let f = fit_hnn_warm(data, &weights.penalty(&grid.points[i])?, &config.solver, state.as_ref())?;
        state = Some(f.state.clone());
        fit = Some(f);
    }
    let fit = fit.expect("chain is non-empty");
    let refit = refit(data, &fit, config.solver.rank_tol)?;
    let consensus = Consensus {
        split_seeds: seeds,
        selected_indices: indices,
        ranks: selected_ranks[chosen].clone(),
        selected_ranks,
        chosen_split: chosen,
        point_index,
        point,
    };
    Ok(TuneResult { weights, grid, reports, consensus, fit, refit })
}
