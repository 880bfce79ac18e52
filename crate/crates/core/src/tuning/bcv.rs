//! 2x2 bi-cross-validation over a tuning grid.
//!
//! Rows and every view's columns are split in two by seeded permutations.
//! For held-out block `(j, k)` the model is fit on the rows outside `j` and
//! columns outside `k`, and `X^{j,k}` is predicted as
//! `X^{j,-k} pinv(Mhat_{-j,-k}) X^{-j,k}`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HnnError, Result};
use crate::hierarchy::{select_block, Preprocessing, ViewSet};
use crate::linalg::{self, Matrix};
use crate::refit::refit_estimate;
use crate::solver::{fit_hnn_warm, SolverConfig, SolverState};

use super::grid::TuningGrid;
use super::select::{average, select_one_se, OneSeSelection};
use super::weights::SureWeights;

/// Held-out blocks in report order.
pub const FOLDS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcvSplit {
    pub seed: Option<u64>,
    pub row_perm: Vec<usize>,
    pub col_perms: Vec<Vec<usize>>,
}

fn check_perm(perm: &[usize], len: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; len];
    if perm.len() != len {
        return Err(invalid(format!("{what} permutation has length {} instead of {len}", perm.len())));
    }
    for &i in perm {
        if i >= len || std::mem::replace(&mut seen[i], true) {
            return Err(invalid(format!("{what} permutation is not a permutation of 0..{len}")));
        }
    }
    Ok(())
}

fn halves(perm: &[usize], fold: usize) -> &[usize] {
    let cut = perm.len().div_ceil(2);
    if fold == 0 {
        &perm[..cut]
    } else {
        &perm[cut..]
    }
}

impl BcvSplit {
    pub fn from_permutations(row_perm: Vec<usize>, col_perms: Vec<Vec<usize>>) -> Result<Self> {
        check_perm(&row_perm, row_perm.len(), "row")?;
        for (d, c) in col_perms.iter().enumerate() {
            check_perm(c, c.len(), &format!("view {} column", d + 1))?;
        }
        if row_perm.len() < 4 || col_perms.iter().any(|c| c.len() < 4) {
            return Err(invalid("2x2 bi-cross-validation needs at least 4 rows and 4 columns per view"));
        }
        Ok(BcvSplit { seed: None, row_perm, col_perms })
    }

    pub fn identity(n: usize, p: &[usize]) -> Result<Self> {
        Self::from_permutations((0..n).collect(), p.iter().map(|&p| (0..p).collect()).collect())
    }

    /// Row fold `j`: the first `ceil(n/2)` permuted rows for `j = 0`, the
    /// rest for `j = 1`.
    pub fn row_fold(&self, j: usize) -> &[usize] {
        halves(&self.row_perm, j)
    }

    pub fn col_fold(&self, view: usize, k: usize) -> &[usize] {
        halves(&self.col_perms[view], k)
    }

    /// Data with rows and columns in permuted order, so that the identity
    /// split of the result has the same blocks as this split.
    pub fn reassemble(&self, data: &ViewSet) -> Result<ViewSet> {
        self.check(data)?;
        let views = data
            .views()
            .iter()
            .zip(&self.col_perms)
            .map(|(x, c)| select_block(x, &self.row_perm, c))
            .collect();
        ViewSet::new(views)
    }

    fn check(&self, data: &ViewSet) -> Result<()> {
        if self.row_perm.len() != data.rows() || self.col_perms.iter().map(Vec::len).ne(data.col_counts()) {
            return Err(crate::error::mismatch("split does not match the data dimensions"));
        }
        Ok(())
    }
}

pub fn bcv_split(data: &ViewSet, seed: u64) -> Result<BcvSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..data.rows()).collect();
    rows.shuffle(&mut rng);
    let cols = data
        .col_counts()
        .into_iter()
        .map(|p| {
            let mut c: Vec<usize> = (0..p).collect();
            c.shuffle(&mut rng);
            c
        })
        .collect();
    let mut split = BcvSplit::from_permutations(rows, cols)?;
    split.seed = Some(seed);
    Ok(split)
}

struct Fold {
    train: ViewSet,
    row_side: Vec<Matrix>,
    col_side: Vec<Matrix>,
    held_out: Vec<Matrix>,
}

fn prepare(data: &ViewSet, split: &BcvSplit, (j, k): (usize, usize)) -> Result<Fold> {
    let rows_in = split.row_fold(j);
    let rows_out = split.row_fold(1 - j);
    let mut train = Vec::new();
    let mut row_side = Vec::new();
    let mut col_side = Vec::new();
    let mut held_out = Vec::new();
    for (d, x) in data.views().iter().enumerate() {
        let cols_in = split.col_fold(d, k);
        let cols_out = split.col_fold(d, 1 - k);
        train.push(select_block(x, rows_out, cols_out));
        row_side.push(select_block(x, rows_in, cols_out));
        col_side.push(select_block(x, rows_out, cols_in));
        held_out.push(select_block(x, rows_in, cols_in));
    }
    let train = ViewSet::new(train)?.preprocess(Preprocessing::CenterScale)?;
    Ok(Fold { train, row_side, col_side, held_out })
}

/// Per-view relative squared prediction errors of one held-out block, or
/// `None` when the training fit did not converge.
fn fold_errors(
    fold: &Fold,
    weights: &SureWeights,
    point: &[f64],
    config: &SolverConfig,
    warm: Option<&SolverState>,
) -> Result<(Option<Vec<f64>>, Option<SolverState>)> {
    let spec = weights.penalty(point)?;
    let fit = match fit_hnn_warm(&fold.train, &spec, config, warm) {
        Ok(f) => f,
        Err(HnnError::Divergence { iteration }) => {
            log::warn!("solver diverged at iteration {iteration} for grid point {point:?}");
            return Ok((None, None));
        }
        Err(e) => return Err(e),
    };
    if !fit.converged {
        log::warn!("solver did not converge for grid point {point:?}");
        return Ok((None, Some(fit.state)));
    }
    let refit = refit_estimate(&fold.train, &fit.estimate, config.rank_tol)?;
    let mut errs = Vec::with_capacity(fold.held_out.len());
    for (d, h) in fold.held_out.iter().enumerate() {
        let denom = h.norm_squared();
        let resid = if refit.per_view_rank[d] == 0 {
            denom
        } else {
            let m = fold.train.transforms()[d].invert(&refit.estimate[d]);
            let pinv = linalg::pseudo_inverse(&m, config.rank_tol)?;
            let pred = &fold.row_side[d] * pinv * &fold.col_side[d];
            (h - pred).norm_squared()
        };
        errs.push(if denom > 0.0 { resid / denom } else { resid });
    }
    Ok((Some(errs), Some(fit.state)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcvErrors {
    /// Per point, the four fold errors in [`FOLDS`] order; `+inf` where the
    /// training fit failed to converge.
    #[serde(with = "super::nonfinite")]
    pub fold_errors: Vec<[f64; 4]>,
    /// Per point and fold, the per-view terms averaged into the fold error.
    #[serde(with = "super::nonfinite")]
    pub view_errors: Vec<[Vec<f64>; 4]>,
}

/// Runs every grid chain on every fold in parallel. Within a chain each fit
/// warm-starts from the previous one, so results do not depend on the
/// thread schedule.
pub fn bcv_errors(
    data: &ViewSet,
    split: &BcvSplit,
    grid: &TuningGrid,
    weights: &SureWeights,
    config: &SolverConfig,
) -> Result<BcvErrors> {
    if grid.is_empty() {
        return Err(invalid("tuning grid is empty"));
    }
    split.check(data)?;
    let folds: Vec<Fold> = FOLDS.iter().map(|&f| prepare(data, split, f)).collect::<Result<_>>()?;
    let chains = grid.chains();
    let work: Vec<(usize, usize)> = (0..4).flat_map(|f| (0..chains.len()).map(move |c| (f, c))).collect();
    let results: Vec<Vec<Option<Vec<f64>>>> = work
        .par_iter()
        .map(|&(f, c)| {
            let mut warm: Option<SolverState> = None;
            let mut out = Vec::new();
            for i in chains[c].clone() {
                let (errs, state) = fold_errors(&folds[f], weights, &grid.points[i], config, warm.as_ref())?;
                warm = state;
                out.push(errs);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let d = data.len();
    let mut fold_errors = vec![[f64::INFINITY; 4]; grid.len()];
    let mut view_errors = vec![std::array::from_fn(|_| vec![f64::INFINITY; d]); grid.len()];
    for (&(f, c), res) in work.iter().zip(results) {
        for (i, errs) in chains[c].clone().zip(res) {
            if let Some(e) = errs {
                fold_errors[i][f] = e.iter().sum::<f64>() / d as f64;
                view_errors[i][f] = e;
            }
        }
    }
    Ok(BcvErrors { fold_errors, view_errors })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRanks {
    /// Rank of the concatenated refit estimate, counting directions shared
    /// across views once.
    pub total: usize,
    pub per_view: Vec<usize>,
    pub converged: bool,
}

/// Ranks of the refit estimate on the full data at every grid point. The
/// refit keeps every view's column space, so these are read from the rank
/// profile of the penalized fit.
pub fn full_data_ranks(
    data: &ViewSet,
    grid: &TuningGrid,
    weights: &SureWeights,
    config: &SolverConfig,
) -> Result<Vec<PointRanks>> {
    let chains = grid.chains();
    let results: Vec<Vec<PointRanks>> = chains
        .par_iter()
        .map(|chain| {
            let mut warm: Option<SolverState> = None;
            let mut out = Vec::new();
            for i in chain.clone() {
                let spec = weights.penalty(&grid.points[i])?;
                let fit = fit_hnn_warm(data, &spec, config, warm.as_ref())?;
                out.push(PointRanks {
                    total: fit.rank_profile.total(),
                    per_view: fit.rank_profile.per_view(),
                    converged: fit.converged,
                });
                warm = Some(fit.state);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcvReport {
    pub split: BcvSplit,
    pub points: Vec<Vec<f64>>,
    #[serde(flatten)]
    pub errors: BcvErrors,
    #[serde(with = "super::nonfinite")]
    pub avg_err: Vec<f64>,
    pub full_ranks: Vec<PointRanks>,
    pub selection: OneSeSelection,
    pub selected_point: Vec<f64>,
    pub selected_total_rank: usize,
    pub selected_per_view_ranks: Vec<usize>,
}

impl BcvReport {
    pub fn assemble(split: BcvSplit, grid: &TuningGrid, errors: BcvErrors, full_ranks: Vec<PointRanks>) -> Result<Self> {
        let totals: Vec<usize> = full_ranks.iter().map(|r| r.total).collect();
        let selection = select_one_se(&errors.fold_errors, &totals, &grid.points)?;
        let i = selection.index;
        Ok(BcvReport {
            split,
            points: grid.points.clone(),
            avg_err: errors.fold_errors.iter().map(average).collect(),
            selected_point: grid.points[i].clone(),
            selected_total_rank: full_ranks[i].total,
            selected_per_view_ranks: full_ranks[i].per_view.clone(),
            errors,
            full_ranks,
            selection,
        })
    }
}

pub fn bcv_evaluate(
    data: &ViewSet,
    split: &BcvSplit,
    grid: &TuningGrid,
    weights: &SureWeights,
    config: &SolverConfig,
) -> Result<BcvReport> {
    let errors = bcv_errors(data, split, grid, weights, config)?;
    let ranks = full_data_ranks(data, grid, weights, config)?;
    BcvReport::assemble(split.clone(), grid, errors, ranks)
}
