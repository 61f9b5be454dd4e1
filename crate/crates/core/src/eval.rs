//! Cached evaluation of a rule over the whole grid.
//!
//! Per-arm binomial pmfs are tabulated once at every grid probability; the
//! expected assignment of a rule at every grid point is then a multilinear
//! contraction of the rule's columns with those tables, which replaces
//! `O(|grid| * W)` scalar likelihood evaluations by a few dense products.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Design, GridPoint, ParameterGrid, ProblemSpec, TreatmentRule};
use crate::prob::{grid_value, PmfTable};
use crate::tensor::{contract, MatRef};

/// Which grid points nature's scan visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanRegion {
    Full,
    /// Points with `mu_1 <= 1/2`; enough when the rule is mirror-symmetric.
    MirrorHalf,
    /// Points with `mu_1 <= mu_2 <= ...`; enough when the rule is
    /// permutation-symmetric.
    Sorted,
    /// Points with `mu_1 < mu_2 < ...`: the sorted scan without ties among
    /// the unknown means.
    StrictlySorted,
}

/// Two candidates closer than this are treated as tied and the
/// lexicographically smaller point wins.
pub const NATURE_TIE_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct GridEvaluator {
    spec: ProblemSpec,
    grid: ParameterGrid,
    tables: Vec<Arc<PmfTable>>,
}

impl GridEvaluator {
    pub fn new(spec: &ProblemSpec, grid: &ParameterGrid) -> Result<Self> {
        if grid.free_dims() != spec.num_observed_arms() {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} free dimensions, problem observes {} arms",
                grid.free_dims(),
                spec.num_observed_arms()
            )));
        }
        let mut by_size: HashMap<usize, Arc<PmfTable>> = HashMap::new();
        let tables = spec
            .observed_sizes()
            .into_iter()
            .map(|n| {
                by_size
                    .entry(n)
                    .or_insert_with(|| Arc::new(PmfTable::new(n, grid.resolution())))
                    .clone()
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            grid: grid.clone(),
            tables,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    /// Pmf rows of every observed arm at a grid point.
    pub fn atom_rows(&self, point: &GridPoint) -> Vec<&[f64]> {
        self.tables
            .iter()
            .zip(point.coords())
            .map(|(t, &c)| t.row(c as usize))
            .collect()
    }

    fn coord_ranges(&self, region: ScanRegion) -> Vec<(usize, usize)> {
        let p = self.grid.resolution();
        let mut ranges = vec![(0, p); self.grid.free_dims()];
        if region == ScanRegion::MirrorHalf {
            ranges[0] = (0, p / 2);
        }
        ranges
    }

    /// `E delta_t` over the box of coordinate ranges for every treatment but
    /// the last, row-major over the box.
    fn expectation_surfaces(&self, rule: &TreatmentRule, ranges: &[(usize, usize)]) -> Vec<Vec<f64>> {
        let dims = rule.sample_space().dims();
        let mats: Vec<MatRef<'_>> = self
            .tables
            .iter()
            .zip(ranges)
            .map(|(t, &(lo, hi))| MatRef {
                data: t.rows(lo, hi),
                rows: hi - lo + 1,
                cols: t.width(),
            })
            .collect();
        (0..rule.num_treatments() - 1)
            .map(|t| contract(&rule.column(t), &dims, &mats))
            .collect()
    }

    /// Nature's best response within `region`: lowest-coordinate argmax of
    /// regret among admissible points and the maximal regret.
    pub fn max_regret(&self, rule: &TreatmentRule, region: ScanRegion) -> Result<(GridPoint, f64)> {
        rule.check_shape(&self.spec)?;
        let ranges = self.coord_ranges(region);
        let surfaces = self.expectation_surfaces(rule, &ranges);
        let p = self.grid.resolution();
        let k = ranges.len();
        let t_count = self.spec.num_treatments();
        let status_quo = match self.spec.design() {
            Design::TestingInnovations => self.spec.status_quo_mean(),
            Design::FixedAssignment => None,
        };

        let mut coords: Vec<u32> = ranges.iter().map(|&(lo, _)| lo as u32).collect();
        let mut means = vec![0.0; t_count];
        let total: usize = ranges.iter().map(|&(lo, hi)| hi - lo + 1).product();
        let mut best: Option<(usize, f64)> = None;
        let mut best_coords = coords.clone();

        for idx in 0..total {
            if idx > 0 {
                // Odometer increment, last coordinate fastest.
                let mut d = k - 1;
                loop {
                    if (coords[d] as usize) < ranges[d].1 {
                        coords[d] += 1;
                        break;
                    }
                    coords[d] = ranges[d].0 as u32;
                    d -= 1;
                }
            }
            match region {
                ScanRegion::Sorted if coords.windows(2).any(|w| w[0] > w[1]) => continue,
                ScanRegion::StrictlySorted if coords.windows(2).any(|w| w[0] >= w[1]) => continue,
                _ => {}
            }
            if !self.grid.contains_coords(&coords) {
                continue;
            }
            for (m, &c) in means.iter_mut().zip(&coords) {
                *m = grid_value(c as usize, p);
            }
            if let Some(mu_t) = status_quo {
                means[t_count - 1] = mu_t;
            }
            let last = means[t_count - 1];
            let top = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut r = top - last;
            for (t, s) in surfaces.iter().enumerate() {
                r -= (means[t] - last) * s[idx];
            }
            let r = r.max(0.0);
            match best {
                Some((_, v)) if r <= v + NATURE_TIE_TOL => {}
                _ => {
                    best = Some((idx, r));
                    best_coords.copy_from_slice(&coords);
                }
            }
        }
        match best {
            Some((_, v)) => Ok((GridPoint(best_coords), v)),
            None => Err(Error::EmptyGrid),
        }
    }

    /// Regret at every admissible grid point, in lexicographic order.
    pub fn regret_surface(&self, rule: &TreatmentRule) -> Result<Vec<(GridPoint, f64)>> {
        rule.check_shape(&self.spec)?;
        let ranges = self.coord_ranges(ScanRegion::Full);
        let surfaces = self.expectation_surfaces(rule, &ranges);
        let side = self.grid.resolution() + 1;
        let t_count = self.spec.num_treatments();
        let mut out = Vec::new();
        for point in self.grid.points() {
            let idx = point.coords().iter().fold(0usize, |acc, &c| acc * side + c as usize);
            let mu = self.grid.mean_vector(&point, &self.spec);
            let means = mu.as_slice();
            let last = means[t_count - 1];
            let mut r = mu.best() - last;
            for (t, s) in surfaces.iter().enumerate() {
                r -= (means[t] - last) * s[idx];
            }
            out.push((point, r.max(0.0)));
        }
        Ok(out)
    }
}
