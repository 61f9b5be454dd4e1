use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Design, MeanVector, ProblemSpec};
use crate::prob::grid_value;

/// Integer coordinates `(i_1, ..)` of a grid point; the means are `i_t / p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint(pub Vec<u32>);

impl GridPoint {
    pub fn coords(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Slack on the ratio band so that boundary points of the closed set, which are
/// exact in rational arithmetic, survive floating-point rounding.
const BAND_SLACK: f64 = 1e-9;

/// Restriction on nature's free means.
#[derive(Clone)]
pub enum Constraint {
    Unrestricted,
    /// `lo * mu_1 <= mu_2 <= hi * mu_1` (two free dimensions only).
    RatioBand { lo: f64, hi: f64 },
    Custom(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>),
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Unrestricted => write!(f, "Unrestricted"),
            Constraint::RatioBand { lo, hi } => write!(f, "RatioBand({lo}, {hi})"),
            Constraint::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Constraint {
    pub fn is_unrestricted(&self) -> bool {
        matches!(self, Constraint::Unrestricted)
    }
}

/// The evenly spaced grid `{i / p : i = 0..=p}^d` over nature's free means,
/// filtered by a constraint.
#[derive(Debug, Clone)]
pub struct ParameterGrid {
    resolution: usize,
    free_dims: usize,
    constraint: Constraint,
}

impl ParameterGrid {
    pub fn new(resolution: usize, free_dims: usize, constraint: Constraint) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidConfig("grid resolution p must be at least 1".into()));
        }
        if free_dims == 0 {
            return Err(Error::InvalidConfig("grid needs at least one free dimension".into()));
        }
        if let Constraint::RatioBand { lo, hi } = constraint {
            if free_dims != 2 {
                return Err(Error::InvalidConfig(
                    "ratio band restriction needs exactly two free means".into(),
                ));
            }
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidConfig(format!("invalid ratio band [{lo}, {hi}]")));
            }
        }
        Ok(Self {
            resolution,
            free_dims,
            constraint,
        })
    }

    pub fn unrestricted(resolution: usize, free_dims: usize) -> Result<Self> {
        Self::new(resolution, free_dims, Constraint::Unrestricted)
    }

    /// Unrestricted grid shaped for the problem's free means.
    pub fn for_spec(spec: &ProblemSpec, resolution: usize, constraint: Constraint) -> Result<Self> {
        Self::new(resolution, spec.num_observed_arms(), constraint)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn free_dims(&self) -> usize {
        self.free_dims
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn contains_coords(&self, coords: &[u32]) -> bool {
        if coords.len() != self.free_dims || coords.iter().any(|&c| c as usize > self.resolution) {
            return false;
        }
        match &self.constraint {
            Constraint::Unrestricted => true,
            Constraint::RatioBand { lo, hi } => {
                let (a, b) = (coords[0] as f64, coords[1] as f64);
                let slack = BAND_SLACK * a.max(1.0);
                lo * a <= b + slack && b <= hi * a + slack
            }
            Constraint::Custom(pred) => {
                let means: Vec<f64> = coords
                    .iter()
                    .map(|&c| grid_value(c as usize, self.resolution))
                    .collect();
                pred(&means)
            }
        }
    }

    pub fn contains(&self, point: &GridPoint) -> bool {
        self.contains_coords(&point.0)
    }

    /// Admissible points in lexicographic coordinate order.
    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        let side = self.resolution + 1;
        let total = side.pow(self.free_dims as u32);
        (0..total)
            .map(move |mut flat| {
                let mut c = vec![0u32; self.free_dims];
                for d in (0..self.free_dims).rev() {
                    c[d] = (flat % side) as u32;
                    flat /= side;
                }
                GridPoint(c)
            })
            .filter(move |p| self.contains(p))
    }

    pub fn num_points(&self) -> usize {
        self.points().count()
    }

    pub fn mirror(&self, point: &GridPoint) -> GridPoint {
        GridPoint(point.0.iter().map(|&c| self.resolution as u32 - c).collect())
    }

    /// Whether `mu -> 1 - mu` maps the grid into itself.
    pub fn is_mirror_closed(&self) -> bool {
        match self.constraint {
            Constraint::Unrestricted => true,
            _ => self.points().all(|p| self.contains(&self.mirror(&p))),
        }
    }

    /// Whether every coordinate permutation of a grid point is a grid point.
    pub fn is_permutation_closed(&self) -> bool {
        match self.constraint {
            Constraint::Unrestricted => true,
            _ => self.points().all(|p| {
                crate::innovations::permutations(&p.0)
                    .into_iter()
                    .all(|q| self.contains_coords(&q))
            }),
        }
    }

    /// Means of a grid point for the given problem (appends the known status
    /// quo mean under testing innovations).
    pub fn mean_vector(&self, point: &GridPoint, spec: &ProblemSpec) -> MeanVector {
        means_from_coords(&point.0, self.resolution, spec)
    }
}

pub(crate) fn means_from_coords(coords: &[u32], resolution: usize, spec: &ProblemSpec) -> MeanVector {
    let mut means: Vec<f64> = coords
        .iter()
        .map(|&c| grid_value(c as usize, resolution))
        .collect();
    if spec.design() == Design::TestingInnovations {
        means.push(spec.status_quo_mean().unwrap_or(0.0));
    }
    MeanVector::new_unchecked(means)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_lexicographic() {
        let g = ParameterGrid::unrestricted(2, 2).unwrap();
        let pts: Vec<GridPoint> = g.points().collect();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], GridPoint(vec![0, 0]));
        assert_eq!(pts[1], GridPoint(vec![0, 1]));
        assert_eq!(pts[8], GridPoint(vec![2, 2]));
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ratio_band_keeps_boundary() {
        let g = ParameterGrid::new(1000, 2, Constraint::RatioBand { lo: 0.9, hi: 1.2 }).unwrap();
        // 0.9 * 10 = 9 and 1.2 * 10 = 12 lie on the boundary.
        assert!(g.contains(&GridPoint(vec![10, 9])));
        assert!(g.contains(&GridPoint(vec![10, 12])));
        assert!(!g.contains(&GridPoint(vec![10, 13])));
        assert!(!g.contains(&GridPoint(vec![10, 8])));
        assert!(g.contains(&GridPoint(vec![0, 0])));
        assert!(!g.contains(&GridPoint(vec![0, 1])));
        assert!(!g.is_mirror_closed());
    }

    #[test]
    fn empty_after_constraint() {
        let g = ParameterGrid::new(4, 2, Constraint::Custom(Arc::new(|_| false))).unwrap();
        assert_eq!(g.num_points(), 0);
    }

    #[test]
    fn invalid_grids() {
        assert!(ParameterGrid::unrestricted(0, 2).is_err());
        assert!(ParameterGrid::new(10, 3, Constraint::RatioBand { lo: 0.9, hi: 1.2 }).is_err());
        assert!(ParameterGrid::new(10, 2, Constraint::RatioBand { lo: 2.0, hi: 1.0 }).is_err());
    }

    #[test]
    fn means_for_innovations() {
        let spec = ProblemSpec::testing_innovations(3, 4, 0.2).unwrap();
        let g = ParameterGrid::for_spec(&spec, 10, Constraint::Unrestricted).unwrap();
        let mv = g.mean_vector(&GridPoint(vec![3, 10]), &spec);
        assert_eq!(mv.as_slice(), &[0.3, 1.0, 0.2]);
    }
}
