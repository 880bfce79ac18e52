//! SURE-based relative weights within each hierarchical level.
//!
//! A level groups the subsets of one size. Every subset below the full set
//! gets `omega_S = lambda_S^SURE / sum_{|T| = |S|} lambda_T^SURE`; the full
//! set has weight 1. A grid point carries one parameter per subset size and
//! maps to the penalty `lambda_S = param_{|S|} * omega_S`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::hierarchy::{PenaltySpec, Subset, ViewSet};
use crate::linalg;

use super::sure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetWeight {
    pub subset: Subset,
    pub noise_sd: f64,
    pub sure_lambda: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SureWeights {
    pub views: usize,
    /// Every subset below the full set, in lattice order.
    pub subsets: Vec<SubsetWeight>,
    /// Subset sizes whose SURE cutoffs were all zero and fell back to
    /// uniform weights.
    pub uniform_levels: Vec<usize>,
}

impl SureWeights {
    pub fn weight(&self, s: Subset) -> f64 {
        if s == Subset::full(self.views) {
            return 1.0;
        }
        self.subsets.iter().find(|w| w.subset == s).map_or(0.0, |w| w.weight)
    }

    pub fn sure_lambda(&self, s: Subset) -> Option<f64> {
        self.subsets.iter().find(|w| w.subset == s).map(|w| w.sure_lambda)
    }

    /// Penalty for level parameters indexed by subset size minus one, so
    /// `params[0]` scales the singletons and `params[views - 1]` is the raw
    /// full-set penalty.
    pub fn penalty(&self, params: &[f64]) -> Result<PenaltySpec> {
        if params.len() != self.views {
            return Err(mismatch(format!(
                "expected {} level parameters, got {}",
                self.views,
                params.len()
            )));
        }
        let mut spec = PenaltySpec::zeros(self.views)?;
        for s in spec.lattice().iter().collect::<Vec<_>>() {
            spec.set(s, params[s.len() - 1] * self.weight(s))?;
        }
        Ok(spec)
    }
}

/// MAD noise estimate of every concatenation below the full set.
pub fn estimate_noise(data: &ViewSet) -> Result<BTreeMap<Subset, f64>> {
    let lattice = data.lattice();
    let full = lattice.full();
    lattice
        .iter()
        .filter(|&s| s != full)
        .map(|s| Ok((s, linalg::estimate_noise_mad(&data.concat(s)?)?)))
        .collect()
}

pub fn compute_weights(data: &ViewSet, noise: &BTreeMap<Subset, f64>) -> Result<SureWeights> {
    let lattice = data.lattice();
    let d = data.len();
    let mut subsets = Vec::new();
    for s in lattice.iter().filter(|&s| s != lattice.full()) {
        let sd = *noise
            .get(&s)
            .ok_or_else(|| invalid(format!("missing noise estimate for {s}")))?;
        if !(sd >= 0.0) || !sd.is_finite() {
            return Err(invalid(format!("noise estimate for {s} must be nonnegative, got {sd}")));
        }
        let lambda = sure::sure_lambda(&data.concat(s)?, sd)?;
        subsets.push(SubsetWeight { subset: s, noise_sd: sd, sure_lambda: lambda, weight: 0.0 });
    }
    let mut uniform_levels = Vec::new();
    for size in 1..d {
        let members: Vec<usize> = (0..subsets.len()).filter(|&i| subsets[i].subset.len() == size).collect();
        let total: f64 = members.iter().map(|&i| subsets[i].sure_lambda).sum();
        if total > 0.0 {
            for &i in &members {
                subsets[i].weight = subsets[i].sure_lambda / total;
            }
        } else {
            log::warn!("all SURE cutoffs of size-{size} subsets are zero; using uniform weights");
            uniform_levels.push(size);
            for &i in &members {
                subsets[i].weight = 1.0 / members.len() as f64;
            }
        }
    }
    Ok(SureWeights { views: d, subsets, uniform_levels })
}
