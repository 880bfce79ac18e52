//! Hierarchical decomposition of per-view column spaces into joint,
//! partially-shared and individual structures.
//!
//! Level 1 intersects all column spaces. Each later level intersects what is
//! left of each view after removing the structures of the earlier levels, and
//! whatever survives the last shared level is individual.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Result};
use crate::hierarchy::{Subset, SubsetLattice, ViewSet};
use crate::linalg::{self, Basis, Matrix};
use crate::refit::RefitResult;
use crate::solver::FitResult;

#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    pub views: usize,
    pub column_spaces: Vec<Basis>,
    /// `J(1..D)`.
    pub joint: Basis,
    /// `J(S)` for `2 <= |S| < D`.
    pub partial: BTreeMap<Subset, Basis>,
    /// `I(d)`, indexed by 0-based view.
    pub individual: Vec<Basis>,
    /// `R_d^(k)` keyed by (0-based view, level) for levels `1..D-1`.
    pub remainders: BTreeMap<(usize, usize), Basis>,
    /// `Q_d^(k)` keyed by (0-based view, level) for levels `2..D-1`.
    pub spans_q: BTreeMap<(usize, usize), Basis>,
    /// Principal-angle cosines seen at every pairwise fold of each
    /// intersection, for auditing near-shared directions.
    pub fold_cosines: BTreeMap<Subset, Vec<Vec<f64>>>,
}

impl SubspaceDecomposition {
    /// Basis of the structure attached to `s`: joint for the full set,
    /// individual for singletons, partially-shared otherwise.
    pub fn structure(&self, s: Subset) -> Option<&Basis> {
        match s.len() {
            0 => None,
            1 => self.individual.get(s.indices()[0]),
            k if k == self.views => Some(&self.joint),
            _ => self.partial.get(&s),
        }
    }

    /// Structures in lattice order (joint first, individual last).
    pub fn structures(&self) -> Vec<(Subset, &Basis)> {
        SubsetLattice::new(self.views)
            .expect("decomposition always holds a valid view count")
            .iter()
            .filter_map(|s| self.structure(s).map(|b| (s, b)))
            .collect()
    }

    pub fn dims(&self) -> BTreeMap<Subset, usize> {
        self.structures().into_iter().map(|(s, b)| (s, b.dim())).collect()
    }

    pub fn to_json(&self) -> StructuresJson {
        StructuresJson {
            views: self.views,
            rows: self.joint.rows(),
            structures: self
                .structures()
                .into_iter()
                .map(|(s, b)| StructureBasis {
                    subset: s,
                    kind: StructureKind::of(s, self.views),
                    dim: b.dim(),
                    basis: rows_of(b.matrix()),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Joint,
    Partial,
    Individual,
}

impl StructureKind {
    pub fn of(s: Subset, views: usize) -> Self {
        match s.len() {
            1 => StructureKind::Individual,
            k if k == views => StructureKind::Joint,
            _ => StructureKind::Partial,
        }
    }
}

/// A structure basis in serializable form; `basis` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureBasis {
    pub subset: Subset,
    pub kind: StructureKind,
    pub dim: usize,
    pub basis: Vec<Vec<f64>>,
}

impl StructureBasis {
    pub fn to_basis(&self, rows: usize) -> Result<Basis> {
        if self.basis.len() != rows || self.basis.iter().any(|r| r.len() != self.dim) {
            return Err(mismatch(format!("structure {} has a malformed basis", self.subset)));
        }
        Ok(Basis::from_orthonormal(Matrix::from_fn(rows, self.dim, |i, j| self.basis[i][j])))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuresJson {
    pub views: usize,
    pub rows: usize,
    pub structures: Vec<StructureBasis>,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Intersection of several bases, folded pairwise in the given order.
fn fold_intersection(bases: &[&Basis], angle_tol: f64) -> Result<(Basis, Vec<Vec<f64>>)> {
    let mut acc = bases[0].clone();
    let mut cosines = Vec::new();
    for b in &bases[1..] {
        if acc.is_empty() || b.is_empty() {
            cosines.push(Vec::new());
            acc = Basis::empty(acc.rows());
            continue;
        }
        cosines.push(linalg::principal_angle_cosines(&acc, b)?);
        acc = linalg::subspace_intersection(&acc, b, angle_tol)?;
    }
    Ok((acc, cosines))
}

pub fn decompose(estimate: &[Matrix], rank_tol: f64, angle_tol: f64) -> Result<SubspaceDecomposition> {
    let bases: Vec<Basis> = estimate
        .iter()
        .map(|m| linalg::column_basis(m, rank_tol))
        .collect::<Result<_>>()?;
    decompose_bases(bases, angle_tol)
}

/// [`decompose`] from precomputed orthonormal column-space bases.
pub fn decompose_bases(bases: Vec<Basis>, angle_tol: f64) -> Result<SubspaceDecomposition> {
    let d = bases.len();
    let lattice = SubsetLattice::new(d)?;
    let n = bases[0].rows();
    if bases.iter().any(|b| b.rows() != n) {
        return Err(mismatch("all views must share the row count"));
    }
    let mut fold_cosines = BTreeMap::new();

    let all: Vec<&Basis> = bases.iter().collect();
    let (joint, cos) = fold_intersection(&all, angle_tol)?;
    fold_cosines.insert(lattice.full(), cos);

    let mut remainders = BTreeMap::new();
    let mut current: Vec<Basis> = bases
        .iter()
        .map(|b| linalg::residual_basis(b, &joint, angle_tol))
        .collect::<Result<_>>()?;
    for (v, r) in current.iter().enumerate() {
        remainders.insert((v, 1), r.clone());
    }

    let mut partial = BTreeMap::new();
    let mut spans_q = BTreeMap::new();
    for level in 2..d {
        let mut shared: Vec<(Subset, Basis)> = Vec::new();
        for &s in lattice.level(level) {
            let members: Vec<&Basis> = s.indices().into_iter().map(|v| &current[v]).collect();
            let (j, cos) = fold_intersection(&members, angle_tol)?;
            fold_cosines.insert(s, cos);
            shared.push((s, j));
        }
        let mut next = Vec::with_capacity(d);
        for (v, prev) in current.iter().enumerate() {
            let containing: Vec<&Basis> = shared
                .iter()
                .filter(|(s, _)| s.contains(v))
                .map(|(_, b)| b)
                .collect();
            let q = linalg::span_of(&containing, angle_tol)?;
            let r = linalg::residual_basis(prev, &q, angle_tol)?;
            spans_q.insert((v, level), q);
            remainders.insert((v, level), r.clone());
            next.push(r);
        }
        partial.extend(shared);
        current = next;
    }

    Ok(SubspaceDecomposition {
        views: d,
        column_spaces: bases,
        joint,
        partial,
        individual: current,
        remainders,
        spans_q,
        fold_cosines,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureRank {
    pub subset: Subset,
    pub kind: StructureKind,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub per_structure_rank: Vec<StructureRank>,
    pub per_view_total_rank: Vec<usize>,
    pub total_rank: usize,
    /// `||refit_d||^2 / ||X_d||^2` per view.
    pub explained_variation: Vec<f64>,
}

impl StructureReport {
    pub fn rank_of(&self, s: Subset) -> Option<usize> {
        self.per_structure_rank.iter().find(|r| r.subset == s).map(|r| r.rank)
    }

    /// Ranks in lattice order: joint, partially-shared, individual.
    pub fn ranks(&self) -> Vec<usize> {
        self.per_structure_rank.iter().map(|r| r.rank).collect()
    }
}

pub fn structure_report(
    data: &ViewSet,
    fit: &FitResult,
    refit_result: &RefitResult,
    decomp: &SubspaceDecomposition,
) -> Result<StructureReport> {
    if refit_result.estimate.len() != data.len() || decomp.views != data.len() {
        return Err(mismatch("report inputs cover different view counts"));
    }
    let per_structure_rank = decomp
        .structures()
        .into_iter()
        .map(|(s, b)| StructureRank {
            subset: s,
            kind: StructureKind::of(s, decomp.views),
            rank: b.dim(),
        })
        .collect();
    let explained_variation = data
        .views()
        .iter()
        .zip(&refit_result.estimate)
        .map(|(x, m)| {
            let denom = x.norm_squared();
            if denom > 0.0 {
                m.norm_squared() / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(StructureReport {
        per_structure_rank,
        per_view_total_rank: fit.rank_profile.per_view(),
        total_rank: fit.rank_profile.total(),
        explained_variation,
    })
}

/// Principal-angle cosines between two structures; empty when either is
/// trivial.
pub fn compare_angles(a: &Basis, b: &Basis) -> Result<Vec<f64>> {
    if a.rows() != b.rows() {
        return Err(mismatch("structures live in different sample spaces"));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    linalg::principal_angle_cosines(a, b)
}
