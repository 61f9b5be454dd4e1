use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProblemSpec, SampleSpace};

const SIMPLEX_TOL: f64 = 1e-12;

/// Per-treatment success means chosen by nature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVector(Vec<f64>);

impl MeanVector {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if let Some(m) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::Domain(format!("mean {m} outside [0, 1]")));
        }
        Ok(Self(means))
    }

    pub(crate) fn new_unchecked(means: Vec<f64>) -> Self {
        Self(means)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn best(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks length and, for testing innovations, that the last entry is the
    /// known status quo mean.
    pub fn check_for(&self, spec: &ProblemSpec) -> Result<()> {
        if self.0.len() != spec.num_treatments() {
            return Err(Error::ShapeMismatch(format!(
                "mean vector has {} entries, problem has {} treatments",
                self.0.len(),
                spec.num_treatments()
            )));
        }
        if let Some(mu_t) = spec.status_quo_mean() {
            if self.0[self.0.len() - 1] != mu_t {
                return Err(Error::Domain(format!(
                    "status quo mean must be {mu_t}, got {}",
                    self.0[self.0.len() - 1]
                )));
            }
        }
        Ok(())
    }
}

/// A randomized treatment rule: for every sample, a probability vector over the
/// `T` treatments. Stored dense, one row of length `T` per flat sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentRule {
    num_treatments: usize,
    space: SampleSpace,
    probs: Vec<f64>,
}

impl TreatmentRule {
    pub fn from_fn<F>(num_treatments: usize, arm_sizes: Vec<usize>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let space = SampleSpace::new(arm_sizes);
        let mut probs = Vec::with_capacity(space.len() * num_treatments);
        for counts in space.iter() {
            let row = f(&counts);
            if row.len() != num_treatments {
                return Err(Error::ShapeMismatch(format!(
                    "rule row has {} entries, expected {num_treatments}",
                    row.len()
                )));
            }
            probs.extend(row);
        }
        let rule = Self {
            num_treatments,
            space,
            probs,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn from_probs(num_treatments: usize, arm_sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let space = SampleSpace::new(arm_sizes);
        if probs.len() != space.len() * num_treatments {
            return Err(Error::ShapeMismatch(format!(
                "{} probabilities for {} samples x {num_treatments} treatments",
                probs.len(),
                space.len()
            )));
        }
        let rule = Self {
            num_treatments,
            space,
            probs,
        };
        rule.validate()?;
        Ok(rule)
    }

    /// The nonrandomized rule that always picks `treatment` (0-based).
    pub fn constant(spec: &ProblemSpec, treatment: usize) -> Result<Self> {
        let t = spec.num_treatments();
        if treatment >= t {
            return Err(Error::Domain(format!("treatment {treatment} out of range 0..{t}")));
        }
        Self::from_fn(t, spec.observed_sizes(), |_| {
            let mut row = vec![0.0; t];
            row[treatment] = 1.0;
            row
        })
    }

    /// Every row nonnegative and summing to one.
    pub fn validate(&self) -> Result<()> {
        for (w, row) in self.probs.chunks(self.num_treatments).enumerate() {
            if row.iter().any(|&x| !(x >= -SIMPLEX_TOL)) {
                return Err(Error::Domain(format!("negative probability in rule row {w}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOL.max(1e-9 * self.num_treatments as f64) {
                return Err(Error::Domain(format!("rule row {w} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn num_treatments(&self) -> usize {
        self.num_treatments
    }

    pub fn arm_sizes(&self) -> &[usize] {
        self.space.sizes()
    }

    pub fn sample_space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn num_samples(&self) -> usize {
        self.space.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, w: usize) -> &[f64] {
        &self.probs[w * self.num_treatments..(w + 1) * self.num_treatments]
    }

    pub fn row_mut(&mut self, w: usize) -> &mut [f64] {
        let t = self.num_treatments;
        &mut self.probs[w * t..(w + 1) * t]
    }

    pub fn at(&self, counts: &[usize]) -> &[f64] {
        self.row(self.space.flat(counts))
    }

    /// Column `t` as a tensor over samples.
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.probs
            .iter()
            .skip(t)
            .step_by(self.num_treatments)
            .copied()
            .collect()
    }

    /// `delta_2(n_1, n_2)` of a two-arm rule.
    pub fn delta2(&self, n1: usize, n2: usize) -> f64 {
        self.at(&[n1, n2])[1]
    }

    /// Errors unless the rule is indexed over the problem's sample space.
    pub fn check_shape(&self, spec: &ProblemSpec) -> Result<()> {
        if self.num_treatments != spec.num_treatments() || self.space.sizes() != spec.observed_sizes() {
            return Err(Error::ShapeMismatch(format!(
                "rule over {:?} with {} treatments does not fit problem over {:?} with {}",
                self.space.sizes(),
                self.num_treatments,
                spec.observed_sizes(),
                spec.num_treatments()
            )));
        }
        Ok(())
    }

    /// `self <- (1 - alpha) self + alpha other`.
    pub fn blend(&mut self, other: &TreatmentRule, alpha: f64) {
        debug_assert_eq!(self.probs.len(), other.probs.len());
        for (x, &y) in self.probs.iter_mut().zip(&other.probs) {
            *x = (1.0 - alpha) * *x + alpha * y;
        }
    }
}
