//! Synthetic multi-view data with known joint, partially-shared and
//! individual structure.
//!
//! Each structure `S` with rank `s_S` contributes `U_S D_S V_{d,S}^T` to every
//! view `d` in `S`. Scores and loadings start as `Unif(0,1)` draws and are
//! then orthonormalized; noise is Gaussian with a per-view standard deviation
//! fixed by the signal-to-noise ratio `||M_d||^2 / (sigma_d^2 n p_d)`.
//!
//! Random streams: every draw comes from a `ChaCha8Rng` seeded with the
//! config seed, with a dedicated stream per structure and per purpose, so
//! editing one structure leaves the draws of the others unchanged.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, HnnError, Result};
use crate::hierarchy::{Preprocessing, RankProfile, Subset, SubsetLattice, ViewSet};
use crate::linalg::{self, Basis, Matrix};

/// How score subspaces relate across structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreScheme {
    /// All score subspaces mutually orthogonal.
    #[default]
    Orthogonal,
    /// One designated pair at prescribed principal angles, all else
    /// orthogonal.
    NonOrthogonal,
    /// Every pair of shared structures left non-orthogonal, as is every
    /// individual structure against the pairwise structure of the two other
    /// views. All remaining pairs orthogonal. Three views only.
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub subset: Subset,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: Vec<usize>,
    pub ranks: Vec<RankEntry>,
    pub scheme: ScoreScheme,
    /// Structures set at prescribed angles under the non-orthogonal scheme.
    /// Defaults to the two individual structures for two views and to
    /// `(1,2)` and `(1,3)` for three views.
    pub designated_pair: Option<(Subset, Subset)>,
    pub target_angles_deg: Vec<f64>,
    pub snr: f64,
    pub singular_value_range: (f64, f64),
    /// Centre every score draw before orthonormalizing, so that column
    /// centring of the generated data leaves the signal ranks intact.
    pub center_scores: bool,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self::two_view(ScoreScheme::Orthogonal, 0)
    }
}

fn entries(list: &[(&[usize], usize)]) -> Vec<RankEntry> {
    list.iter()
        .map(|(labels, rank)| RankEntry {
            subset: Subset::from_labels(labels).expect("preset labels are valid"),
            rank: *rank,
        })
        .collect()
}

impl SimulationConfig {
    /// Two views, `n = 150`, `p = (50, 50)`, joint rank 2, individual ranks 4,
    /// SNR 1.
    pub fn two_view(scheme: ScoreScheme, seed: u64) -> Self {
        SimulationConfig {
            n: 150,
            p: vec![50, 50],
            ranks: entries(&[(&[1, 2], 2), (&[1], 4), (&[2], 4)]),
            scheme,
            designated_pair: None,
            target_angles_deg: vec![30.0, 40.0, 50.0, 60.0],
            snr: 1.0,
            singular_value_range: (1.0, 1.5),
            center_scores: false,
            seed,
        }
    }

    /// Three views, `n = 100`, `p = (100, 100, 100)`, pairwise ranks
    /// `(4, 4, 2)`, all other ranks 2, SNR 2.
    pub fn three_view(scheme: ScoreScheme, seed: u64) -> Self {
        SimulationConfig {
            n: 100,
            p: vec![100, 100, 100],
            ranks: entries(&[
                (&[1, 2, 3], 2),
                (&[1, 2], 4),
                (&[1, 3], 4),
                (&[2, 3], 2),
                (&[1], 2),
                (&[2], 2),
                (&[3], 2),
            ]),
            scheme,
            designated_pair: None,
            target_angles_deg: vec![30.0, 40.0, 50.0, 60.0],
            snr: 2.0,
            singular_value_range: (1.0, 1.5),
            center_scores: false,
            seed,
        }
    }

    /// Three views with every structure of rank 2.
    pub fn three_view_equal(scheme: ScoreScheme, seed: u64) -> Self {
        let mut c = Self::three_view(scheme, seed);
        for e in &mut c.ranks {
            e.rank = 2;
        }
        c.target_angles_deg = vec![30.0, 40.0];
        c
    }

    /// Three views with joint rank 1, individual ranks 2 and pairwise ranks
    /// `(1, 3, 5)`.
    pub fn three_view_mixed(scheme: ScoreScheme, seed: u64) -> Self {
        let mut c = Self::three_view(scheme, seed);
        c.ranks = entries(&[
            (&[1, 2, 3], 1),
            (&[1, 2], 1),
            (&[1, 3], 3),
            (&[2, 3], 5),
            (&[1], 2),
            (&[2], 2),
            (&[3], 2),
        ]);
        c.target_angles_deg = vec![30.0];
        c
    }

    pub fn preset(name: &str, scheme: ScoreScheme, seed: u64) -> Result<Self> {
        match name {
            "two-view" => Ok(Self::two_view(scheme, seed)),
            "three-view" => Ok(Self::three_view(scheme, seed)),
            "three-view-equal" => Ok(Self::three_view_equal(scheme, seed)),
            "three-view-mixed" => Ok(Self::three_view_mixed(scheme, seed)),
            other => Err(invalid(format!(
                "unknown preset {other:?}; expected two-view, three-view, three-view-equal or three-view-mixed"
            ))),
        }
    }

    pub fn views(&self) -> usize {
        self.p.len()
    }

    pub fn rank(&self, s: Subset) -> usize {
        self.ranks.iter().filter(|e| e.subset == s).map(|e| e.rank).sum()
    }

    pub fn pair(&self) -> Result<(Subset, Subset)> {
        if let Some(p) = self.designated_pair {
            return Ok(p);
        }
        match self.views() {
            2 => Ok((Subset::singleton(0), Subset::singleton(1))),
            3 => Ok((Subset::from_labels(&[1, 2])?, Subset::from_labels(&[1, 3])?)),
            d => Err(invalid(format!("no default designated pair for {d} views"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.views();
        let lattice = SubsetLattice::new(d)?;
        if self.n < 2 || self.p.iter().any(|&p| p == 0) {
            return Err(invalid("dimensions must be positive and n >= 2"));
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(invalid(format!("snr must be positive, got {}", self.snr)));
        }
        let (lo, hi) = self.singular_value_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(invalid("singular value range must satisfy 0 < lo <= hi"));
        }
        for e in &self.ranks {
            if !lattice.contains(e.subset) {
                return Err(invalid(format!("structure {} is outside a {d}-view lattice", e.subset)));
            }
        }
        let total: usize = lattice.iter().map(|s| self.rank(s)).sum();
        if total == 0 {
            return Err(invalid("all structure ranks are zero"));
        }
        if total > self.n {
            return Err(HnnError::Infeasible(format!(
                "total rank {total} exceeds the sample count {}",
                self.n
            )));
        }
        for (v, &p) in self.p.iter().enumerate() {
            let r: usize = lattice.iter().filter(|s| s.contains(v)).map(|s| self.rank(s)).sum();
            if r > p {
                return Err(HnnError::Infeasible(format!(
                    "view {} needs rank {r} but has {p} columns",
                    v + 1
                )));
            }
        }
        match self.scheme {
            ScoreScheme::Orthogonal => {}
            ScoreScheme::NonOrthogonal => {
                let (a, b) = self.pair()?;
                if a == b || !lattice.contains(a) || !lattice.contains(b) {
                    return Err(invalid("designated pair must name two distinct structures"));
                }
                let k = self.rank(a).min(self.rank(b));
                if k == 0 || self.target_angles_deg.len() != k {
                    return Err(HnnError::Infeasible(format!(
                        "{} target angles given for a pair whose smaller rank is {k}",
                        self.target_angles_deg.len()
                    )));
                }
                if self
                    .target_angles_deg
                    .iter()
                    .any(|a| !(*a > 0.0 && *a <= 90.0))
                {
                    return Err(invalid("target angles must lie in (0, 90] degrees"));
                }
            }
            ScoreScheme::AllPairs => {
                if d != 3 {
                    return Err(invalid("the all-pairs scheme is defined for three views"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedTruth {
    pub config: SimulationConfig,
    pub signals: Vec<Matrix>,
    pub scores: BTreeMap<Subset, Basis>,
    /// Loadings per structure, one `p_d x s_S` block per member view in
    /// ascending view order.
    pub loadings: BTreeMap<Subset, Vec<Matrix>>,
    pub singular_values: BTreeMap<Subset, Vec<f64>>,
    pub noise_sd: Vec<f64>,
    pub data: ViewSet,
}

impl SimulatedTruth {
    pub fn structure_ranks(&self) -> BTreeMap<Subset, usize> {
        SubsetLattice::new(self.config.views())
            .expect("validated")
            .iter()
            .map(|s| (s, self.config.rank(s)))
            .collect()
    }

    pub fn rank_profile(&self, rank_tol: f64, angle_tol: f64) -> Result<RankProfile> {
        RankProfile::from_estimate(&self.signals, rank_tol, angle_tol)
    }
}

const SCORE_STREAM: u64 = 1;
const LOADING_STREAM: u64 = 1 << 16;
const SINGULAR_STREAM: u64 = 2 << 16;
const NOISE_STREAM: u64 = 3 << 16;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix {
    Matrix::from_fn(n, p, |_, _| rng.random::<f64>())
}

fn orthonormalize(a: &Matrix) -> Result<Matrix> {
    let k = a.ncols();
    let basis = linalg::column_basis(a, 1e-10)?;
    if basis.dim() < k {
        return Err(HnnError::Infeasible("score draw is numerically rank deficient".into()));
    }
    Ok(basis.into_matrix())
}

/// Scores drawn on top of `avoid`: the draw is optionally column-centred,
/// projected off `avoid` and re-orthonormalized.
fn draw_scores(rng: &mut ChaCha8Rng, n: usize, k: usize, avoid: &[&Basis], center: bool) -> Result<Matrix> {
    let mut raw = uniform(rng, n, k);
    if center {
        for mut c in raw.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
    }
    if !avoid.is_empty() {
        let keep: Vec<&Basis> = avoid.iter().copied().filter(|b| !b.is_empty()).collect();
        if !keep.is_empty() {
            let stacked = linalg::hcat(&keep.iter().map(|b| b.matrix()).collect::<Vec<_>>())?;
            let q = Basis::from_orthonormal(orthonormalize(&stacked)?);
            raw = linalg::project(&q, &raw, true)?;
        }
    }
    orthonormalize(&raw)
}

/// Whether two structures must be orthogonal under the all-pairs scheme.
fn all_pairs_orthogonal(a: Subset, b: Subset, d: usize) -> bool {
    let shared = |s: Subset| s.len() >= 2 && s.len() < d;
    if shared(a) && shared(b) {
        return false;
    }
    if a.len() == 1 && shared(b) && a.is_disjoint(b) {
        return false;
    }
    if b.len() == 1 && shared(a) && a.is_disjoint(b) {
        return false;
    }
    true
}

pub fn generate(config: &SimulationConfig) -> Result<SimulatedTruth> {
    config.validate()?;
    let d = config.views();
    let n = config.n;
    let lattice = SubsetLattice::new(d)?;
    let structures: Vec<(usize, Subset, usize)> = lattice
        .iter()
        .enumerate()
        .map(|(pos, s)| (pos, s, config.rank(s)))
        .filter(|&(_, _, r)| r > 0)
        .collect();

    let mut scores: BTreeMap<Subset, Basis> = BTreeMap::new();
    let pair = match config.scheme {
        ScoreScheme::NonOrthogonal => Some(config.pair()?),
        _ => None,
    };
    for &(pos, s, r) in &structures {
        if scores.contains_key(&s) {
            continue;
        }
        let mut rng = stream(config.seed, SCORE_STREAM + pos as u64);
        match (config.scheme, pair) {
            (ScoreScheme::NonOrthogonal, Some((a, b))) if s == a || s == b => {
                let (ra, rb) = (config.rank(a), config.rank(b));
                let k = ra.min(rb);
                let avoid: Vec<&Basis> = scores.values().collect();
                // One frame holds both structures: the first k columns are
                // shared, the rest carry the rotation and any excess rank.
                let frame = draw_scores(&mut rng, n, ra + rb, &avoid, config.center_scores)?;
                let w1 = frame.columns(0, k).into_owned();
                let w2 = frame.columns(k, k).into_owned();
                let extra_a = frame.columns(2 * k, ra - k).into_owned();
                let extra_b = frame.columns(2 * k + (ra - k), rb - k).into_owned();
                let mut rotated = Matrix::zeros(n, k);
                for (j, deg) in config.target_angles_deg.iter().enumerate() {
                    let t = deg.to_radians();
                    let col = w1.column(j) * t.cos() + w2.column(j) * t.sin();
                    rotated.set_column(j, &col);
                }
                let ua = linalg::hcat(&[&w1, &extra_a])?;
                let ub = linalg::hcat(&[&rotated, &extra_b])?;
                scores.insert(a, Basis::from_orthonormal(ua));
                scores.insert(b, Basis::from_orthonormal(ub));
            }
            (ScoreScheme::AllPairs, _) => {
                let avoid: Vec<&Basis> = scores
                    .iter()
                    .filter(|(t, _)| all_pairs_orthogonal(s, **t, d))
                    .map(|(_, b)| b)
                    .collect();
                scores.insert(s, Basis::from_orthonormal(draw_scores(&mut rng, n, r, &avoid, config.center_scores)?));
            }
            _ => {
                let avoid: Vec<&Basis> = scores.values().collect();
                scores.insert(s, Basis::from_orthonormal(draw_scores(&mut rng, n, r, &avoid, config.center_scores)?));
            }
        }
    }
    let all_scores: Vec<&Matrix> = scores.values().map(|b| b.matrix()).collect();
    if linalg::numerical_rank(&linalg::hcat(&all_scores)?, 1e-10)? < all_scores.iter().map(|m| m.ncols()).sum() {
        return Err(HnnError::Infeasible("score subspaces are linearly dependent".into()));
    }

    // Loadings: per view, the blocks of every structure containing the view
    // are orthonormalized together, then structure S is scaled by
    // 1/sqrt(|S|) so the stacked loading matrix has orthonormal columns.
    let mut loadings: BTreeMap<Subset, Vec<Matrix>> = BTreeMap::new();
    let mut raw_blocks: BTreeMap<(Subset, usize), Matrix> = BTreeMap::new();
    for &(pos, s, r) in &structures {
        let mut rng = stream(config.seed, LOADING_STREAM + pos as u64);
        for v in s.indices() {
            raw_blocks.insert((s, v), uniform(&mut rng, config.p[v], r));
        }
    }
    let mut ortho_blocks: BTreeMap<(Subset, usize), Matrix> = BTreeMap::new();
    for v in 0..d {
        let members: Vec<(Subset, usize)> = structures
            .iter()
            .filter(|(_, s, _)| s.contains(v))
            .map(|&(_, s, r)| (s, r))
            .collect();
        if members.is_empty() {
            continue;
        }
        let stacked = linalg::hcat(&members.iter().map(|(s, _)| &raw_blocks[&(*s, v)]).collect::<Vec<_>>())?;
        let q = orthonormalize(&stacked)?;
        let mut offset = 0;
        for (s, r) in members {
            let scale = 1.0 / (s.len() as f64).sqrt();
            ortho_blocks.insert((s, v), q.columns(offset, r) * scale);
            offset += r;
        }
    }
    for &(_, s, _) in &structures {
        loadings.insert(s, s.indices().into_iter().map(|v| ortho_blocks[&(s, v)].clone()).collect());
    }

    let (lo, hi) = config.singular_value_range;
    let mut singular_values = BTreeMap::new();
    for &(pos, s, r) in &structures {
        let mut rng = stream(config.seed, SINGULAR_STREAM + pos as u64);
        let vals: Vec<f64> = (0..r).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
        singular_values.insert(s, vals);
    }

    let mut signals: Vec<Matrix> = config.p.iter().map(|&p| Matrix::zeros(n, p)).collect();
    for &(_, s, _) in &structures {
        let mut ud = scores[&s].matrix().clone();
        for (j, mut col) in ud.column_iter_mut().enumerate() {
            col *= singular_values[&s][j];
        }
        for (k, v) in s.indices().into_iter().enumerate() {
            signals[v] += &ud * loadings[&s][k].transpose();
        }
    }

    let mut noise_sd = Vec::with_capacity(d);
    let mut views = Vec::with_capacity(d);
    for (v, m) in signals.iter().enumerate() {
        let p = config.p[v];
        let sd = m.norm() / (config.snr * (n * p) as f64).sqrt();
        let mut rng = stream(config.seed, NOISE_STREAM + v as u64);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let noise = Matrix::from_fn(n, p, |_, _| normal.sample(&mut rng));
        views.push(m + noise * sd);
        noise_sd.push(sd);
    }
    let data = ViewSet::new(views)?;

    Ok(SimulatedTruth {
        config: config.clone(),
        signals,
        scores,
        loadings,
        singular_values,
        noise_sd,
        data,
    })
}

/// `sum_d ||M_d - Mhat_d||^2 / ||M_d||^2`.
pub fn scaled_frobenius_error(truth: &[Matrix], estimate: &[Matrix]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.iter().zip(estimate).any(|(a, b)| a.shape() != b.shape()) {
        return Err(mismatch("truth and estimate shapes differ"));
    }
    let mut total = 0.0;
    for (d, (m, e)) in truth.iter().zip(estimate).enumerate() {
        let denom = m.norm_squared();
        if denom == 0.0 {
            return Err(invalid(format!("true signal of view {} is zero", d + 1)));
        }
        total += (m - e).norm_squared() / denom;
    }
    Ok(total)
}

/// Column-centre every view, then scale it to unit Frobenius norm.
pub fn preprocess(data: &ViewSet) -> Result<ViewSet> {
    data.preprocess(Preprocessing::CenterScale)
}
