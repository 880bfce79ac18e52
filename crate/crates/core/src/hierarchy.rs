//! Views, the subset lattice over them, and penalty specifications.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, mismatch, Result};
use crate::linalg::{self, check_finite, Basis, Matrix};

/// Largest supported number of views.
pub const MAX_VIEWS: usize = 6;

/// A nonempty set of views stored as a bitmask over 0-based view indices.
///
/// Displayed and serialized with 1-based indices, e.g. `[1,3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(u32);

impl Subset {
    /// Builds a subset from 0-based view indices.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut bits = 0u32;
        for &i in indices {
            if i >= MAX_VIEWS {
                return Err(invalid(format!("view index {} out of range", i + 1)));
            }
            bits |= 1 << i;
        }
        if bits == 0 {
            return Err(invalid("subset must be nonempty"));
        }
        Ok(Subset(bits))
    }

    /// Builds a subset from 1-based view labels.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(invalid("view labels are 1-based"));
        }
        let idx: Vec<usize> = labels.iter().map(|l| l - 1).collect();
        Self::from_indices(&idx)
    }

    pub fn singleton(view: usize) -> Self {
        Subset(1 << view)
    }

    pub fn full(d: usize) -> Self {
        Subset((1u32 << d) - 1)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, view: usize) -> bool {
        view < 32 && self.0 & (1 << view) != 0
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Subset) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    /// 0-based view indices in ascending order.
    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|&i| self.contains(i)).collect()
    }

    /// 1-based view labels in ascending order.
    pub fn labels(self) -> Vec<usize> {
        self.indices().into_iter().map(|i| i + 1).collect()
    }

    /// Applies a view relabelling: view `i` moves to `perm[i]`.
    pub fn permuted(self, perm: &[usize]) -> Subset {
        let mut bits = 0;
        for i in self.indices() {
            bits |= 1 << perm[i];
        }
        Subset(bits)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.labels().iter().map(|l| l.to_string()).collect();
        write!(f, "({})", labels.join(","))
    }
}

impl Serialize for Subset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(d)?;
        Subset::from_labels(&labels).map_err(serde::de::Error::custom)
    }
}

/// All nonempty subsets of `{1..d}` grouped by hierarchical level.
///
/// Level 1 holds the full set and level `d` the singletons. Within a level
/// subsets are in lexicographic order of their sorted labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetLattice {
    d: usize,
    levels: Vec<Vec<Subset>>,
}

impl SubsetLattice {
    pub fn new(d: usize) -> Result<Self> {
        if !(2..=MAX_VIEWS).contains(&d) {
            return Err(invalid(format!("view count must be in 2..={MAX_VIEWS}, got {d}")));
        }
        let mut levels = Vec::with_capacity(d);
        for level in 1..=d {
            let size = d - level + 1;
            let mut subsets: Vec<Subset> = (1u32..(1 << d))
                .filter(|b| b.count_ones() as usize == size)
                .map(Subset)
                .collect();
            subsets.sort_by_key(|s| s.indices());
            levels.push(subsets);
        }
        Ok(SubsetLattice { d, levels })
    }

    pub fn views(&self) -> usize {
        self.d
    }

    /// Subsets of level `level` (1-based).
    pub fn level(&self, level: usize) -> &[Subset] {
        &self.levels[level - 1]
    }

    pub fn levels(&self) -> &[Vec<Subset>] {
        &self.levels
    }

    pub fn level_of(&self, s: Subset) -> usize {
        self.d - s.len() + 1
    }

    /// Level 1 first, then level 2, and so on.
    pub fn iter(&self) -> impl Iterator<Item = Subset> + '_ {
        self.levels.iter().flatten().copied()
    }

    /// Singletons first, full set last.
    pub fn update_order(&self) -> impl Iterator<Item = Subset> + '_ {
        self.levels.iter().rev().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn full(&self) -> Subset {
        Subset::full(self.d)
    }

    pub fn contains(&self, s: Subset) -> bool {
        s.bits() != 0 && s.bits() < (1 << self.d)
    }
}

pub fn build_lattice(d: usize) -> Result<SubsetLattice> {
    SubsetLattice::new(d)
}

/// Per-subset nuclear-norm weights. Every lattice subset carries an entry;
/// zero means unpenalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PenaltyRepr", into = "PenaltyRepr")]
pub struct PenaltySpec {
    d: usize,
    lambda: BTreeMap<Subset, f64>,
}

#[derive(Serialize, Deserialize)]
struct PenaltyEntry {
    subset: Subset,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct PenaltyRepr {
    views: usize,
    terms: Vec<PenaltyEntry>,
}

impl TryFrom<PenaltyRepr> for PenaltySpec {
    type Error = String;

    fn try_from(r: PenaltyRepr) -> std::result::Result<Self, String> {
        let mut spec = PenaltySpec::zeros(r.views).map_err(|e| e.to_string())?;
        for t in r.terms {
            spec.set(t.subset, t.lambda).map_err(|e| e.to_string())?;
        }
        Ok(spec)
    }
}

impl From<PenaltySpec> for PenaltyRepr {
    fn from(p: PenaltySpec) -> Self {
        let lattice = p.lattice();
        PenaltyRepr {
            views: p.d,
            terms: lattice
                .iter()
                .map(|s| PenaltyEntry {
                    subset: s,
                    lambda: p.get(s),
                })
                .collect(),
        }
    }
}

impl PenaltySpec {
    pub fn zeros(d: usize) -> Result<Self> {
        let lattice = SubsetLattice::new(d)?;
        Ok(PenaltySpec {
            d,
            lambda: lattice.iter().map(|s| (s, 0.0)).collect(),
        })
    }

    pub fn uniform(d: usize, value: f64) -> Result<Self> {
        let mut p = Self::zeros(d)?;
        for s in p.lattice().iter() {
            p.set(s, value)?;
        }
        Ok(p)
    }

    /// A spec with one active term.
    pub fn single(d: usize, subset: Subset, value: f64) -> Result<Self> {
        let mut p = Self::zeros(d)?;
        p.set(subset, value)?;
        Ok(p)
    }

    pub fn views(&self) -> usize {
        self.d
    }

    pub fn lattice(&self) -> SubsetLattice {
        SubsetLattice::new(self.d).expect("spec always holds a valid view count")
    }

    pub fn get(&self, s: Subset) -> f64 {
        self.lambda.get(&s).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, s: Subset, value: f64) -> Result<()> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(invalid(format!("penalty for {s} must be finite and >= 0, got {value}")));
        }
        if s.bits() >= (1 << self.d) {
            return Err(invalid(format!("subset {s} is outside a {}-view lattice", self.d)));
        }
        self.lambda.insert(s, value);
        Ok(())
    }

    pub fn active(&self) -> impl Iterator<Item = (Subset, f64)> + '_ {
        self.lambda.iter().filter(|(_, &v)| v > 0.0).map(|(&s, &v)| (s, v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Subset, f64)> + '_ {
        self.lambda.iter().map(|(&s, &v)| (s, v))
    }

    /// The same penalty after relabelling view `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PenaltySpec {
        PenaltySpec {
            d: self.d,
            lambda: self.lambda.iter().map(|(&s, &v)| (s.permuted(perm), v)).collect(),
        }
    }
}

/// Ranks of the column-wise concatenations of an estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankProfile {
    pub rank: BTreeMap<Subset, usize>,
}

#[derive(Serialize, Deserialize)]
struct RankEntry {
    subset: Subset,
    rank: usize,
}

impl Serialize for RankProfile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut entries: Vec<RankEntry> = self
            .rank
            .iter()
            .map(|(&subset, &rank)| RankEntry { subset, rank })
            .collect();
        entries.sort_by_key(|e| (usize::MAX - e.subset.len(), e.subset.indices()));
        entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RankProfile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<RankEntry>::deserialize(d)?;
        Ok(RankProfile {
            rank: entries.into_iter().map(|e| (e.subset, e.rank)).collect(),
        })
    }
}

impl RankProfile {
    /// Rank of every concatenation, as the dimension of the sum of the
    /// per-view column spaces. Directions closer than `angle_tol` count once.
    pub fn from_estimate(estimate: &[Matrix], rank_tol: f64, angle_tol: f64) -> Result<Self> {
        let lattice = SubsetLattice::new(estimate.len())?;
        let bases: Vec<Basis> = estimate
            .iter()
            .map(|m| linalg::column_basis(m, rank_tol))
            .collect::<Result<_>>()?;
        Self::from_bases(&lattice, &bases, angle_tol)
    }

    pub fn from_bases(lattice: &SubsetLattice, bases: &[Basis], angle_tol: f64) -> Result<Self> {
        let mut rank = BTreeMap::new();
        for s in lattice.iter() {
            let parts: Vec<&Basis> = s.indices().into_iter().map(|i| &bases[i]).collect();
            rank.insert(s, linalg::span_of(&parts, angle_tol)?.dim());
        }
        Ok(RankProfile { rank })
    }

    pub fn get(&self, s: Subset) -> usize {
        self.rank.get(&s).copied().unwrap_or(0)
    }

    /// Rank of the full concatenation.
    pub fn total(&self) -> usize {
        self.rank
            .iter()
            .max_by_key(|(s, _)| s.len())
            .map(|(_, &r)| r)
            .unwrap_or(0)
    }

    pub fn per_view(&self) -> Vec<usize> {
        let mut singles: Vec<(usize, usize)> = self
            .rank
            .iter()
            .filter(|(s, _)| s.len() == 1)
            .map(|(s, &r)| (s.indices()[0], r))
            .collect();
        singles.sort();
        singles.into_iter().map(|(_, r)| r).collect()
    }
}

/// How a view was transformed before fitting: `z = (x - 1 mean^T) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewTransform {
    pub col_means: Vec<f64>,
    pub scale: f64,
}

impl ViewTransform {
    pub fn identity(p: usize) -> Self {
        ViewTransform {
            col_means: vec![0.0; p],
            scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.col_means.iter().all(|&m| m == 0.0)
    }

    /// Maps an estimate in transformed units back to original units.
    pub fn invert(&self, z: &Matrix) -> Matrix {
        let mut x = z * self.scale;
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.col_means[j]);
        }
        x
    }

    /// Back-scaling only, for quantities that carry no mean (signal estimates).
    pub fn unscale(&self, z: &Matrix) -> Matrix {
        z * self.scale
    }
}

/// Preprocessing applied to every view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preprocessing {
    /// Column-centre, then scale to unit Frobenius norm.
    #[default]
    CenterScale,
    /// Unit Frobenius norm without centring.
    Scale,
    None,
}

/// The observed views, sharing their rows, plus the transform that produced
/// them from the raw input.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    views: Vec<Matrix>,
    transforms: Vec<ViewTransform>,
}

impl ViewSet {
    pub fn new(views: Vec<Matrix>) -> Result<Self> {
        if !(2..=MAX_VIEWS).contains(&views.len()) {
            return Err(invalid(format!(
                "need between 2 and {MAX_VIEWS} views, got {}",
                views.len()
            )));
        }
        let n = views[0].nrows();
        for (i, v) in views.iter().enumerate() {
            if v.nrows() != n {
                return Err(mismatch(format!(
                    "view {} has {} rows, view 1 has {n}",
                    i + 1,
                    v.nrows()
                )));
            }
            if v.ncols() == 0 || n == 0 {
                return Err(invalid(format!("view {} is empty", i + 1)));
            }
            check_finite(v, &format!("view {}", i + 1))?;
        }
        let transforms = views.iter().map(|v| ViewTransform::identity(v.ncols())).collect();
        Ok(ViewSet { views, transforms })
    }

    pub fn with_transforms(views: Vec<Matrix>, transforms: Vec<ViewTransform>) -> Result<Self> {
        let mut set = Self::new(views)?;
        if transforms.len() != set.views.len()
            || transforms.iter().zip(&set.views).any(|(t, v)| t.col_means.len() != v.ncols())
        {
            return Err(mismatch("transform record does not match the views"));
        }
        set.transforms = transforms;
        Ok(set)
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, d: usize) -> &Matrix {
        &self.views[d]
    }

    pub fn transforms(&self) -> &[ViewTransform] {
        &self.transforms
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.views[0].nrows()
    }

    pub fn col_counts(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::ncols).collect()
    }

    pub fn lattice(&self) -> SubsetLattice {
        SubsetLattice::new(self.len()).expect("view count validated at construction")
    }

    pub fn concat(&self, s: Subset) -> Result<Matrix> {
        concat_submatrix(&self.views, s)
    }

    /// Applies `mode` on top of the current transform.
    pub fn preprocess(&self, mode: Preprocessing) -> Result<ViewSet> {
        let n = self.rows();
        if n < 2 && mode == Preprocessing::CenterScale {
            return Err(invalid("centring needs at least two rows"));
        }
        let mut views = Vec::with_capacity(self.len());
        let mut transforms = Vec::with_capacity(self.len());
        for (d, (x, prev)) in self.views.iter().zip(&self.transforms).enumerate() {
            let mut z = x.clone();
            let mut means = vec![0.0; x.ncols()];
            if mode == Preprocessing::CenterScale {
                for (j, mut col) in z.column_iter_mut().enumerate() {
                    let m = col.mean();
                    means[j] = m;
                    col.add_scalar_mut(-m);
                }
            }
            let mut scale = 1.0;
            if mode != Preprocessing::None {
                scale = z.norm();
                if !(scale > 0.0) {
                    return Err(invalid(format!("view {} is zero after centring", d + 1)));
                }
                z /= scale;
            }
            // Compose with the existing transform: x_raw = prev.invert(x).
            let composed = ViewTransform {
                col_means: prev
                    .col_means
                    .iter()
                    .zip(&means)
                    .map(|(pm, m)| pm + prev.scale * m)
                    .collect(),
                scale: prev.scale * scale,
            };
            views.push(z);
            transforms.push(composed);
        }
        Ok(ViewSet { views, transforms })
    }

    /// Raw views recovered from the recorded transform.
    pub fn invert(&self) -> Vec<Matrix> {
        self.views
            .iter()
            .zip(&self.transforms)
            .map(|(z, t)| t.invert(z))
            .collect()
    }
}

pub(crate) fn select_block(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Column offsets of each view inside the full concatenation.
pub fn column_offsets(col_counts: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(col_counts.len());
    let mut acc = 0;
    for &p in col_counts {
        out.push(acc);
        acc += p;
    }
    out
}

/// `[M_i1 ... M_ik]` for the views of `s` in ascending order.
pub fn concat_submatrix(views: &[Matrix], s: Subset) -> Result<Matrix> {
    if s.is_empty() {
        return Err(invalid("empty subset"));
    }
    let idx = s.indices();
    if idx.iter().any(|&i| i >= views.len()) {
        return Err(invalid(format!("subset {s} names a missing view")));
    }
    let parts: Vec<&Matrix> = idx.iter().map(|&i| &views[i]).collect();
    linalg::hcat(&parts)
}

/// `sum_S lambda_S ||M_S||_*`.
pub fn hnn_value(estimate: &[Matrix], spec: &PenaltySpec) -> Result<f64> {
    if spec.views() != estimate.len() {
        return Err(mismatch(format!(
            "penalty covers {} views, estimate has {}",
            spec.views(),
            estimate.len()
        )));
    }
    let mut total = 0.0;
    for (s, lam) in spec.active() {
        total += lam * linalg::nuclear_norm(&concat_submatrix(estimate, s)?)?;
    }
    Ok(total)
}
