use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SampleSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// `N_t` observations on every one of the `T` treatments.
    FixedAssignment,
    /// Equal samples on the `T - 1` innovations; the status quo mean is known.
    TestingInnovations,
}

/// The decision problem: sampling design, number of treatments and sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    design: Design,
    num_treatments: usize,
    sample_sizes: Vec<usize>,
    status_quo_mean: Option<f64>,
}

impl ProblemSpec {
    pub fn fixed_assignment(sample_sizes: Vec<usize>) -> Result<Self> {
        if sample_sizes.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least two treatments, got {}",
                sample_sizes.len()
            )));
        }
        Ok(Self {
            design: Design::FixedAssignment,
            num_treatments: sample_sizes.len(),
            sample_sizes,
            status_quo_mean: None,
        })
    }

    pub fn two_arm(n1: usize, n2: usize) -> Result<Self> {
        Self::fixed_assignment(vec![n1, n2])
    }

    /// `num_treatments` counts the status quo, so there are `num_treatments - 1`
    /// sampled innovations of common size `nbar`.
    pub fn testing_innovations(num_treatments: usize, nbar: usize, status_quo_mean: f64) -> Result<Self> {
        if num_treatments < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least two treatments, got {num_treatments}"
            )));
        }
        if !(0.0..=1.0).contains(&status_quo_mean) {
            return Err(Error::InvalidConfig(format!(
                "status quo mean {status_quo_mean} outside [0, 1]"
            )));
        }
        Ok(Self {
            design: Design::TestingInnovations,
            num_treatments,
            sample_sizes: vec![nbar],
            status_quo_mean: Some(status_quo_mean),
        })
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn num_treatments(&self) -> usize {
        self.num_treatments
    }

    pub fn status_quo_mean(&self) -> Option<f64> {
        self.status_quo_mean
    }

    pub fn sample_sizes(&self) -> &[usize] {
        &self.sample_sizes
    }

    pub fn num_observed_arms(&self) -> usize {
        match self.design {
            Design::FixedAssignment => self.num_treatments,
            Design::TestingInnovations => self.num_treatments - 1,
        }
    }

    /// Sample size of each observed arm, in arm order.
    pub fn observed_sizes(&self) -> Vec<usize> {
        match self.design {
            Design::FixedAssignment => self.sample_sizes.clone(),
            Design::TestingInnovations => vec![self.sample_sizes[0]; self.num_treatments - 1],
        }
    }

    pub fn sample_space(&self) -> SampleSpace {
        SampleSpace::new(self.observed_sizes())
    }

    pub fn is_two_arm(&self) -> bool {
        self.design == Design::FixedAssignment && self.num_treatments == 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let s = ProblemSpec::two_arm(2, 3).unwrap();
        assert_eq!(s.observed_sizes(), vec![2, 3]);
        assert_eq!(s.sample_space().len(), 12);
        assert!(s.is_two_arm());

        let s = ProblemSpec::testing_innovations(3, 10, 0.5).unwrap();
        assert_eq!(s.num_observed_arms(), 2);
        assert_eq!(s.sample_space().len(), 121);
        assert_eq!(s.status_quo_mean(), Some(0.5));
    }

    #[test]
    fn invalid_specs() {
        assert!(ProblemSpec::fixed_assignment(vec![4]).is_err());
        assert!(ProblemSpec::testing_innovations(1, 4, 0.5).is_err());
        assert!(ProblemSpec::testing_innovations(3, 4, 1.5).is_err());
    }
}
