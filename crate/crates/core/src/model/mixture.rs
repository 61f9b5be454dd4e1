use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::grid::means_from_coords;
use crate::model::{GridPoint, MeanVector, ProblemSpec};

/// Nature's mixed strategy: finitely many grid points with positive weights.
///
/// Atoms are keyed by grid coordinates, so a point selected twice accumulates
/// weight instead of appearing twice. Iteration order is the key order.
#[derive(Debug, Clone, PartialEq)]
pub struct NatureMixture {
    resolution: usize,
    atoms: BTreeMap<GridPoint, f64>,
}

impl NatureMixture {
    pub fn empty(resolution: usize) -> Self {
        Self {
            resolution,
            atoms: BTreeMap::new(),
        }
    }

    pub fn point_mass(resolution: usize, point: GridPoint) -> Self {
        let mut atoms = BTreeMap::new();
        atoms.insert(point, 1.0);
        Self { resolution, atoms }
    }

    /// Builds a mixture from raw weights, merging repeats and normalizing.
    pub fn from_weights(resolution: usize, weights: impl IntoIterator<Item = (GridPoint, f64)>) -> Result<Self> {
        let mut atoms = BTreeMap::new();
        for (p, w) in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!("mixture weight {w} at {p}")));
            }
            if p.0.iter().any(|&c| c as usize > resolution) {
                return Err(Error::Domain(format!("atom {p} outside grid of resolution {resolution}")));
            }
            if w > 0.0 {
                *atoms.entry(p).or_insert(0.0) += w;
            }
        }
        let total: f64 = atoms.values().sum();
        if atoms.is_empty() || total <= 0.0 {
            return Err(Error::EmptyMixture);
        }
        for w in atoms.values_mut() {
            *w /= total;
        }
        Ok(Self { resolution, atoms })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.values().sum()
    }

    pub fn weight(&self, point: &GridPoint) -> f64 {
        self.atoms.get(point).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GridPoint, f64)> {
        self.atoms.iter().map(|(p, &w)| (p, w))
    }

    /// Atoms with their mean vectors under `spec`.
    pub fn atoms_with_means<'a>(&'a self, spec: &'a ProblemSpec) -> impl Iterator<Item = (&'a GridPoint, MeanVector, f64)> + 'a {
        self.atoms
            .iter()
            .map(move |(p, &w)| (p, means_from_coords(&p.0, self.resolution, spec), w))
    }

    /// `nu <- (1 - alpha) nu + alpha * sum_j share_j I(point_j)` with the shares
    /// summing to one. An empty mixture is replaced by the new atoms outright so
    /// the weights always sum to one.
    pub fn mix_in(&mut self, alpha: f64, atoms: &[(GridPoint, f64)]) {
        if self.atoms.is_empty() {
            for (p, share) in atoms {
                *self.atoms.entry(p.clone()).or_insert(0.0) += share;
            }
            return;
        }
        for w in self.atoms.values_mut() {
            *w *= 1.0 - alpha;
        }
        for (p, share) in atoms {
            *self.atoms.entry(p.clone()).or_insert(0.0) += alpha * share;
        }
        self.atoms.retain(|_, w| *w > 0.0);
    }

    pub fn check_normalized(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let total = self.total_weight();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("mixture weights sum to {total}")));
        }
        Ok(())
    }
}
