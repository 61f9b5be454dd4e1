//! Fictitious play between the policymaker and a grid-restricted nature.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::best_response::{Atom, BayesScores, TiePolicy};
use crate::error::{Error, Result};
use crate::eval::{GridEvaluator, ScanRegion};
use crate::model::{GridPoint, NatureMixture, ParameterGrid, ProblemSpec, TreatmentRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSchedule {
    /// `1 / n`
    Robinson,
    /// `(c + n)^(-eta)`
    LeslieCollins { c: f64, eta: f64 },
    /// `1 / ln(c + n)`, capped at one
    LogDamped { c: f64 },
}

impl Default for WeightSchedule {
    fn default() -> Self {
        WeightSchedule::LeslieCollins { c: 5.0, eta: 0.7 }
    }
}

impl WeightSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightSchedule::Robinson => Ok(()),
            WeightSchedule::LeslieCollins { c, eta } => {
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(Error::InvalidConfig(format!("schedule constant C = {c} must be nonnegative")));
                }
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(Error::InvalidConfig(format!("schedule exponent eta = {eta} must lie in (0, 1]")));
                }
                Ok(())
            }
            WeightSchedule::LogDamped { c } => {
                if !(c > 1.0 && c.is_finite()) {
                    return Err(Error::InvalidConfig(format!("log-damped constant C = {c} must exceed 1")));
                }
                Ok(())
            }
        }
    }

    /// `alpha_n` for `n >= 1`.
    pub fn weight(&self, n: usize) -> f64 {
        let n = n.max(1) as f64;
        match *self {
            WeightSchedule::Robinson => 1.0 / n,
            WeightSchedule::LeslieCollins { c, eta } => (c + n).powf(-eta),
            WeightSchedule::LogDamped { c } => (1.0 / (c + n).ln()).min(1.0),
        }
    }
}

pub fn weight(n: usize, schedule: &WeightSchedule) -> f64 {
    schedule.weight(n)
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub spec: ProblemSpec,
    pub grid: ParameterGrid,
    pub weights: WeightSchedule,
    pub max_iters: usize,
    /// Stop once `upper_n - lower_{n-1}` falls below this; zero disables.
    pub xi: f64,
    /// Stop once `(upper_n - lower_{n-1}) / lower_{n-1}` falls below this.
    pub xi_relative: Option<f64>,
    pub init_rule: TreatmentRule,
    /// Seed for Monte Carlo evaluation downstream; the solver never draws.
    pub rng_seed: u64,
}

impl SolveConfig {
    pub fn new(spec: ProblemSpec, grid: ParameterGrid, init_rule: TreatmentRule) -> Self {
        Self {
            spec,
            grid,
            weights: WeightSchedule::default(),
            max_iters: 2000,
            xi: 0.0,
            xi_relative: None,
            init_rule,
            rng_seed: 0,
        }
    }

    pub fn with_weights(mut self, weights: WeightSchedule) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_xi_relative(mut self, xi_relative: Option<f64>) -> Self {
        self.xi_relative = xi_relative;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.xi >= 0.0) {
            return Err(Error::InvalidConfig(format!("xi = {} must be nonnegative", self.xi)));
        }
        if let Some(r) = self.xi_relative {
            if !(r >= 0.0) {
                return Err(Error::InvalidConfig(format!("relative xi = {r} must be nonnegative")));
            }
        }
        self.weights.validate()?;
        self.init_rule
            .check_shape(&self.spec)
            .map_err(|e| Error::InvalidConfig(format!("initial rule: {e}")))?;
        self.init_rule.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub upper: f64,
    pub lower: f64,
    pub support_size: usize,
    /// Weight given to nature's new action at this iteration; zero when the
    /// run stopped before updating.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub trace: Vec<TraceRow>,
    pub best_rule: TreatmentRule,
    pub best_upper: f64,
    pub best_iter: usize,
    /// `[max_n lower_n, min_n upper_n]`
    pub interval: (f64, f64),
    pub final_rule: TreatmentRule,
    pub final_mixture: NatureMixture,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    pub wall_clock_secs: f64,
}

impl SolveReport {
    pub fn width(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    /// Running `(max lower, min upper)` after each trace row.
    pub fn running_interval(&self) -> Vec<(f64, f64)> {
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        self.trace
            .iter()
            .map(|r| {
                lo = lo.max(r.lower);
                hi = hi.min(r.upper);
                (lo, hi)
            })
            .collect()
    }
}

/// How nature's actions are expanded and how the policymaker's responses are
/// kept inside the symmetric class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Symmetry {
    None,
    Mirror,
    Permutation,
}

impl Symmetry {
    fn region(self) -> ScanRegion {
        match self {
            Symmetry::None => ScanRegion::Full,
            Symmetry::Mirror => ScanRegion::MirrorHalf,
            Symmetry::Permutation => ScanRegion::Sorted,
        }
    }

    fn tie_policy(self) -> TiePolicy {
        match self {
            Symmetry::Mirror => TiePolicy::CenterHalf,
            _ => TiePolicy::SplitEqually,
        }
    }
}

/// Runs fictitious play without exploiting any symmetry.
pub fn solve(config: &SolveConfig) -> Result<SolveReport> {
    run(config, Symmetry::None)
}

pub(crate) fn run(config: &SolveConfig, symmetry: Symmetry) -> Result<SolveReport> {
    config.validate()?;
    let started = Instant::now();
    let eval = GridEvaluator::new(&config.spec, &config.grid)?;
    let p = config.grid.resolution();
    let region = symmetry.region();
    let tie = symmetry.tie_policy();

    let mut rule = config.init_rule.clone();
    let mut nu = NatureMixture::empty(p);
    let mut scores = BayesScores::zeros(config.spec.sample_space(), config.spec.num_treatments());
    let mut prev_lower = 0.0;
    let mut max_lower = 0.0f64;
    let mut best_upper = f64::INFINITY;
    let mut best_rule = rule.clone();
    let mut best_iter = 1;
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut stop_reason = StopReason::MaxIters;

    for n in 1..=config.max_iters {
        let (point, upper) = eval.max_regret(&rule, region)?;
        if !upper.is_finite() {
            return Err(Error::Numerical(format!("maximal regret {upper} at iteration {n}")));
        }
        if upper < best_upper {
            best_upper = upper;
            best_rule = rule.clone();
            best_iter = n;
        }

        let gap = upper - prev_lower;
        let abs_hit = config.xi > 0.0 && gap < config.xi;
        let rel_hit = match config.xi_relative {
            Some(r) if prev_lower > 0.0 => gap / prev_lower < r,
            _ => false,
        };
        if abs_hit || rel_hit {
            trace.push(TraceRow {
                iter: n,
                upper,
                lower: prev_lower,
                support_size: nu.support_size(),
                alpha: 0.0,
            });
            stop_reason = StopReason::Threshold;
            break;
        }

        let alpha = if nu.is_empty() { 1.0 } else { config.weights.weight(n) };
        let atoms = expand_action(&config.grid, &point, symmetry);
        nu.mix_in(alpha, &atoms);
        scores.scale(1.0 - alpha);
        let new_atoms: Vec<Atom<'_>> = atoms
            .iter()
            .map(|(q, share)| Atom {
                rows: eval.atom_rows(q),
                means: config.grid.mean_vector(q, &config.spec).as_slice().to_vec(),
                weight: alpha * share,
            })
            .collect();
        scores.add_atoms(&new_atoms);

        let mut br = scores.bayes_rule(tie);
        match symmetry {
            Symmetry::None => {}
            Symmetry::Mirror => crate::symmetric::symmetrize(&mut br),
            Symmetry::Permutation => crate::innovations::symmetrize(&mut br),
        }
        let lower = scores.mixture_regret(&br);
        if !lower.is_finite() {
            return Err(Error::Numerical(format!("lower bound {lower} at iteration {n}")));
        }
        max_lower = max_lower.max(lower);
        trace.push(TraceRow {
            iter: n,
            upper,
            lower,
            support_size: nu.support_size(),
            alpha,
        });
        prev_lower = lower;

        if n < config.max_iters {
            rule.blend(&br, config.weights.weight(n + 1));
            if symmetry == Symmetry::Mirror {
                crate::symmetric::symmetrize(&mut rule);
            }
        }
    }

    Ok(SolveReport {
        iterations_run: trace.len(),
        trace,
        best_rule,
        best_upper,
        best_iter,
        interval: (max_lower, best_upper),
        final_rule: rule,
        final_mixture: nu,
        stop_reason,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Nature's selected point together with the points it is implicitly paired
/// with, as `(point, share)` with shares summing to one.
fn expand_action(grid: &ParameterGrid, point: &GridPoint, symmetry: Symmetry) -> Vec<(GridPoint, f64)> {
    match symmetry {
        Symmetry::None => vec![(point.clone(), 1.0)],
        Symmetry::Mirror => {
            let m = grid.mirror(point);
            if &m == point {
                vec![(m, 1.0)]
            } else {
                vec![(point.clone(), 0.5), (m, 0.5)]
            }
        }
        Symmetry::Permutation => {
            let orbit = crate::innovations::all_permutations(point.coords());
            let share = 1.0 / orbit.len() as f64;
            orbit.into_iter().map(|c| (GridPoint(c), share)).collect()
        }
    }
}
