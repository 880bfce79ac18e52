//! Per-view bias correction: project each view's data onto the column space
//! of its penalized estimate.

use crate::error::{mismatch, Result};
use crate::hierarchy::ViewSet;
use crate::linalg::{self, Basis, Matrix};
use crate::solver::FitResult;

#[derive(Debug, Clone)]
pub struct RefitResult {
    /// `U_d U_d^T X_d` per view.
    pub estimate: Vec<Matrix>,
    pub per_view_rank: Vec<usize>,
    pub bases: Vec<Basis>,
}

pub fn refit(data: &ViewSet, fit: &FitResult, rank_tol: f64) -> Result<RefitResult> {
    refit_estimate(data, &fit.estimate, rank_tol)
}

/// Same as [`refit`] but from bare per-view estimates.
pub fn refit_estimate(data: &ViewSet, estimate: &[Matrix], rank_tol: f64) -> Result<RefitResult> {
    if estimate.len() != data.len()
        || estimate.iter().zip(data.views()).any(|(m, x)| m.shape() != x.shape())
    {
        return Err(mismatch("estimate shapes do not match the data"));
    }
    let mut out = RefitResult {
        estimate: Vec::with_capacity(data.len()),
        per_view_rank: Vec::with_capacity(data.len()),
        bases: Vec::with_capacity(data.len()),
    };
    for (x, m) in data.views().iter().zip(estimate) {
        let basis = linalg::column_basis(m, rank_tol)?;
        out.estimate.push(linalg::project(&basis, x, false)?);
        out.per_view_rank.push(basis.dim());
        out.bases.push(basis);
    }
    Ok(out)
}
