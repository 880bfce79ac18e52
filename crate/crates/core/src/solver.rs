//! Dual block-coordinate forward-backward solver for
//! `min_M 1/2 sum_d ||X_d - M_d||_F^2 + sum_S lambda_S ||M_S||_*`.
//!
//! One dual matrix `D_S` is kept per penalized subset. The primal iterate is
//! always `M = X - sum_S A_S^T D_S`, where `A_S` selects the columns of the
//! views in `S`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, HnnError, Result};
use crate::hierarchy::{concat_submatrix, hnn_value, PenaltySpec, RankProfile, Subset, ViewSet};
use crate::linalg::{self, Matrix, DEFAULT_ANGLE_TOL, DEFAULT_RANK_TOL};

/// Order in which the dual blocks are refreshed within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateScheme {
    /// Each block update sees the primal left by the previous one.
    #[default]
    Sequential,
    /// All blocks are computed from the same primal, then applied together.
    /// Only stable when `gamma` times the largest number of penalized subsets
    /// sharing a view stays below 2.
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub record_objective: bool,
    pub scheme: UpdateScheme,
    pub rank_tol: f64,
    pub angle_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 1.0,
            epsilon: 1e-6,
            max_iters: 5000,
            record_objective: false,
            scheme: UpdateScheme::Sequential,
            rank_tol: DEFAULT_RANK_TOL,
            angle_tol: DEFAULT_ANGLE_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return Err(invalid(format!("gamma must lie in (0, 2), got {}", self.gamma)));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.rank_tol > 0.0) || !(self.angle_tol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Primal and dual iterates. `m` holds the primal per view.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub m: Vec<Matrix>,
    pub duals: BTreeMap<Subset, Matrix>,
    /// Penalties the duals were computed for.
    pub lambda: BTreeMap<Subset, f64>,
    pub iter: usize,
    pub primal_change: f64,
    pub objective_trace: Option<Vec<f64>>,
    pub primal_trace: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Per-view estimates, with each view read off the penalized
    /// concatenation that gives it the lowest exact rank.
    pub estimate: Vec<Matrix>,
    pub converged: bool,
    pub iters: usize,
    pub final_objective: f64,
    pub rank_profile: RankProfile,
    /// Dual objective in minimization form, `1/2 ||M||^2 - 1/2 ||X||^2`,
    /// after every sweep. Non-increasing; converges to minus the optimal
    /// primal value.
    pub objective_trace: Option<Vec<f64>>,
    /// Primal objective at the raw iterate after every sweep. Converges but
    /// need not decrease monotonically.
    pub primal_trace: Option<Vec<f64>>,
    pub state: SolverState,
}

/// `1/2 sum_d ||X_d - M_d||^2 + HNN(M)`.
pub fn objective(data: &ViewSet, estimate: &[Matrix], spec: &PenaltySpec) -> Result<f64> {
    check_shapes(data, estimate)?;
    let fit: f64 = data
        .views()
        .iter()
        .zip(estimate)
        .map(|(x, m)| (x - m).norm_squared())
        .sum();
    Ok(0.5 * fit + hnn_value(estimate, spec)?)
}

fn check_shapes(data: &ViewSet, estimate: &[Matrix]) -> Result<()> {
    if estimate.len() != data.len()
        || estimate.iter().zip(data.views()).any(|(m, x)| m.shape() != x.shape())
    {
        return Err(mismatch("estimate shapes do not match the data"));
    }
    Ok(())
}

pub fn fit_hnn(data: &ViewSet, spec: &PenaltySpec, config: &SolverConfig) -> Result<FitResult> {
    fit_hnn_warm(data, spec, config, None)
}

/// Like [`fit_hnn`], optionally starting from the state of an earlier fit on
/// the same data. Dual blocks are rescaled to the new penalties, which keeps
/// them feasible.
pub fn fit_hnn_warm(
    data: &ViewSet,
    spec: &PenaltySpec,
    config: &SolverConfig,
    warm: Option<&SolverState>,
) -> Result<FitResult> {
    config.validate()?;
    if spec.views() != data.len() {
        return Err(mismatch(format!(
            "penalty covers {} views, data has {}",
            spec.views(),
            data.len()
        )));
    }
    let lattice = data.lattice();
    let order: Vec<(Subset, f64)> = lattice
        .update_order()
        .map(|s| (s, spec.get(s)))
        .filter(|&(_, lam)| lam > 0.0)
        .collect();

    let mut duals: BTreeMap<Subset, Matrix> = BTreeMap::new();
    for &(s, lam) in &order {
        let shape = (data.rows(), s.indices().iter().map(|&i| data.view(i).ncols()).sum());
        let dual = match warm.and_then(|w| Some((w.duals.get(&s)?, *w.lambda.get(&s)?))) {
            Some((d, old)) if old > 0.0 && d.shape() == shape => d * (lam / old),
            _ => Matrix::zeros(shape.0, shape.1),
        };
        duals.insert(s, dual);
    }
    let mut m: Vec<Matrix> = data.views().to_vec();
    for (&s, d) in &duals {
        scatter_sub(&mut m, s, d, 1.0);
    }

    let gamma = config.gamma;
    let mut trace = config.record_objective.then(Vec::new);
    let mut primal_trace = config.record_objective.then(Vec::new);
    let record = |m: &[Matrix], t: &mut Option<Vec<f64>>, pt: &mut Option<Vec<f64>>| -> Result<()> {
        if let (Some(t), Some(pt)) = (t.as_mut(), pt.as_mut()) {
            t.push(dual_value(data, m));
            pt.push(objective(data, m, spec)?);
        }
        Ok(())
    };
    record(&m, &mut trace, &mut primal_trace)?;

    let total_sq: f64 = data.views().iter().map(|x| x.norm_squared()).sum();
    let mut iter = 0;
    let mut change = f64::INFINITY;
    let mut converged = false;
    while iter < config.max_iters {
        iter += 1;
        let before = m.clone();
        match config.scheme {
            UpdateScheme::Sequential => {
                for &(s, lam) in &order {
                    let delta = dual_step(&m, duals.get_mut(&s).unwrap(), s, lam, gamma, iter)?;
                    scatter_sub(&mut m, s, &delta, 1.0);
                }
            }
            UpdateScheme::Simultaneous => {
                let mut deltas = Vec::with_capacity(order.len());
                for &(s, lam) in &order {
                    deltas.push((s, dual_step(&m, duals.get_mut(&s).unwrap(), s, lam, gamma, iter)?));
                }
                for (s, delta) in &deltas {
                    scatter_sub(&mut m, *s, delta, 1.0);
                }
            }
        }
        let sq: f64 = m.iter().zip(&before).map(|(a, b)| (a - b).norm_squared()).sum();
        change = sq.sqrt();
        if !change.is_finite() || m.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(HnnError::Divergence { iteration: iter });
        }
        record(&m, &mut trace, &mut primal_trace)?;
        if change < config.epsilon {
            converged = true;
            break;
        }
        if change > 1e8 * (1.0 + total_sq.sqrt()) {
            return Err(HnnError::Divergence { iteration: iter });
        }
    }
    if !converged {
        log::debug!("solver stopped at max_iters={} with change {change:e}", config.max_iters);
    }

    let state = SolverState {
        m,
        duals,
        lambda: order.iter().copied().collect(),
        iter,
        primal_change: change,
        objective_trace: trace.clone(),
        primal_trace: primal_trace.clone(),
    };
    let (estimate, rank_profile) = read_estimate(data, &state, gamma, config)?;
    let final_objective = objective(data, &estimate, spec)?;
    Ok(FitResult {
        estimate,
        converged,
        iters: iter,
        final_objective,
        rank_profile,
        objective_trace: trace,
        primal_trace,
        state,
    })
}

/// One dual block update. Returns `Delta D_S` and updates `dual` in place.
fn dual_step(
    m: &[Matrix],
    dual: &mut Matrix,
    s: Subset,
    lam: f64,
    gamma: f64,
    iter: usize,
) -> Result<Matrix> {
    let y = &*dual + concat_submatrix(m, s)? * gamma;
    let dec = linalg::svd(&y).map_err(|e| match e {
        HnnError::NonFinite(_) => HnnError::Divergence { iteration: iter },
        other => other,
    })?;
    // Y - S(Y, lam) is the projection of Y onto the spectral ball of radius lam.
    let mut proj = dec.u.clone();
    for (j, mut col) in proj.column_iter_mut().enumerate() {
        col *= dec.s[j].min(lam);
    }
    let new_dual = proj * &dec.vt;
    let delta = &new_dual - &*dual;
    *dual = new_dual;
    Ok(delta)
}

/// `m_d += sign * block_d(delta)` for every view `d` in `s`.
fn scatter_sub(m: &mut [Matrix], s: Subset, delta: &Matrix, sign: f64) {
    let mut offset = 0;
    for i in s.indices() {
        let p = m[i].ncols();
        m[i] -= delta.columns(offset, p) * sign;
        offset += p;
    }
}

/// Per-view estimates and exact ranks read from the thresholded dual
/// arguments `S(D_S + gamma M_S, lambda_S) / gamma`, which the primal matches
/// at the fixed point.
fn read_estimate(
    data: &ViewSet,
    state: &SolverState,
    gamma: f64,
    config: &SolverConfig,
) -> Result<(Vec<Matrix>, RankProfile)> {
    let lattice = data.lattice();
    let d = data.len();
    let mut exact_rank: BTreeMap<Subset, usize> = BTreeMap::new();
    // (rank, subset size, lattice position, block)
    let mut best: Vec<Option<(usize, usize, usize, Matrix)>> = vec![None; d];
    for (pos, s) in lattice.update_order().enumerate() {
        let Some(dual) = state.duals.get(&s) else { continue };
        let lam = state.lambda[&s];
        let y = dual + concat_submatrix(&state.m, s)? * gamma;
        let dec = linalg::svd(&y)?;
        let thresholded = linalg::soft_threshold_decomposed(&dec, lam) / gamma;
        exact_rank.insert(s, dec.s.iter().filter(|&&v| v > lam).count());
        let mut offset = 0;
        for i in s.indices() {
            let p = data.view(i).ncols();
            let block = thresholded.columns(offset, p).into_owned();
            offset += p;
            let r = linalg::numerical_rank(&block, config.rank_tol)?;
            let key = (r, s.len(), pos);
            let better = match &best[i] {
                None => true,
                Some((br, bl, bp, _)) => key < (*br, *bl, *bp),
            };
            if better {
                best[i] = Some((r, s.len(), pos, block));
            }
        }
    }
    let estimate: Vec<Matrix> = best
        .into_iter()
        .enumerate()
        .map(|(i, b)| b.map(|(_, _, _, m)| m).unwrap_or_else(|| data.view(i).clone()))
        .collect();

    let mut profile = RankProfile::from_estimate(&estimate, config.rank_tol, config.angle_tol)?;
    for (s, r) in exact_rank {
        profile.rank.insert(s, r);
    }
    Ok((estimate, profile))
}

/// `1/2 ||M||^2 - 1/2 ||X||^2` for `M = X - sum_S A_S^T D_S`, the negated
/// dual objective.
fn dual_value(data: &ViewSet, m: &[Matrix]) -> f64 {
    let x_sq: f64 = data.views().iter().map(|x| x.norm_squared()).sum();
    let m_sq: f64 = m.iter().map(|v| v.norm_squared()).sum();
    0.5 * (m_sq - x_sq)
}

/// Primal objective at the raw iterate minus the dual objective
/// `1/2 ||X||^2 - 1/2 ||M||^2`. Nonnegative up to roundoff; zero at the
/// optimum.
pub fn duality_gap(data: &ViewSet, state: &SolverState, spec: &PenaltySpec) -> Result<f64> {
    Ok(objective(data, &state.m, spec)? + dual_value(data, &state.m))
}
