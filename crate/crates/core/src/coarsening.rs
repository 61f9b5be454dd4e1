//! Lifting a rule for binary outcomes to outcomes in `[0, 1]`: replace each
//! outcome `y` by an independent Bernoulli(`y`) draw and apply the rule to the
//! resulting success counts.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::model::{expected_assignment_under, regret_from_assignment, MeanVector, ProblemSpec, SampleIndex, TreatmentRule};
use crate::prob::poisson_binom_pmf;

/// Observed outcomes per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSample {
    arms: Vec<Vec<f64>>,
}

impl RealSample {
    pub fn new(arms: Vec<Vec<f64>>) -> Result<Self> {
        for (a, ys) in arms.iter().enumerate() {
            if let Some(y) = ys.iter().find(|y| !(0.0..=1.0).contains(*y)) {
                return domain(format!("outcome {y} in arm {a} outside [0, 1]"));
            }
        }
        Ok(Self { arms })
    }

    pub fn arms(&self) -> &[Vec<f64>] {
        &self.arms
    }

    pub fn arm_sizes(&self) -> Vec<usize> {
        self.arms.iter().map(Vec::len).collect()
    }
}

/// Uniform draw in `[0, 1)` for observation `index` of the stream `seed`.
/// Each observation owns its own block of the ChaCha keystream, so draws do
/// not depend on how many other observations exist or the order they are
/// visited in.
fn uniform_at(rng: &mut ChaCha8Rng, index: u64) -> f64 {
    rng.set_word_pos(u128::from(index) * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Coarsened success counts, deterministic given `seed`.
pub fn coarsen_sample(sample: &RealSample, seed: u64) -> SampleIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut index = 0u64;
    let counts = sample
        .arms
        .iter()
        .map(|ys| {
            ys.iter()
                .filter(|&&y| {
                    let u = uniform_at(&mut rng, index);
                    index += 1;
                    u < y
                })
                .count()
        })
        .collect();
    SampleIndex::new(counts)
}

/// Exact assignment probabilities of the coarsened rule given the real sample.
pub fn coarsened_assignment_exact(rule: &TreatmentRule, sample: &RealSample) -> Result<Vec<f64>> {
    if rule.arm_sizes() != sample.arm_sizes().as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "rule over {:?} applied to sample with arm sizes {:?}",
            rule.arm_sizes(),
            sample.arm_sizes()
        )));
    }
    let laws = sample
        .arms
        .iter()
        .map(|ys| poisson_binom_pmf(ys))
        .collect::<Result<Vec<_>>>()?;
    expected_assignment_under(rule, &laws)
}

/// Outcome distribution per arm, parameterized by the arm's mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeLaw {
    /// Every outcome equals the mean.
    PointMass,
    /// Outcomes in `{0, 1}`.
    Bernoulli,
    /// Beta(`mu * k`, `(1 - mu) * k`) with concentration `k`.
    Beta { concentration: f64 },
}

impl OutcomeLaw {
    fn draw<R: Rng>(&self, mu: f64, rng: &mut R) -> Result<f64> {
        Ok(match *self {
            OutcomeLaw::PointMass => mu,
            OutcomeLaw::Bernoulli => {
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
            OutcomeLaw::Beta { concentration } => {
                if mu <= 0.0 || mu >= 1.0 {
                    mu
                } else {
                    Beta::new(mu * concentration, (1.0 - mu) * concentration)
                        .map_err(|e| Error::Domain(format!("beta law at mean {mu}: {e}")))?
                        .sample(rng)
                }
            }
        })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            OutcomeLaw::Beta { concentration } if !(concentration > 0.0 && concentration.is_finite()) => {
                domain(format!("beta concentration {concentration} must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Monte Carlo estimate of the coarsened rule's regret when outcomes follow
/// `law` with means `mu`, with its standard error.
///
/// Replication `r` draws from its own ChaCha stream, so the estimate does not
/// depend on the thread count.
pub fn coarsened_regret_mc(
    rule: &TreatmentRule,
    law: OutcomeLaw,
    mu: &MeanVector,
    spec: &ProblemSpec,
    replications: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if replications < 2 {
        return domain(format!("need at least two replications, got {replications}"));
    }
    law.validate()?;
    rule.check_shape(spec)?;
    mu.check_for(spec)?;
    let sizes = spec.observed_sizes();
    let means = mu.as_slice();

    let draws: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let arms = sizes
                .iter()
                .zip(means)
                .map(|(&n, &m)| (0..n).map(|_| law.draw(m, &mut rng)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let sample = RealSample { arms };
            let coarse = coarsen_sample(&sample, rng.next_u64());
            Ok(regret_from_assignment(means, rule.at(&coarse.counts)))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = replications as f64;
    let mean = compensated_sum(draws.iter().copied()) / n;
    let var = compensated_sum(draws.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::regret;
    use crate::symmetric::{es_rule, EsVariant};

    #[test]
    fn extreme_outcomes_are_kept() {
        let s = RealSample::new(vec![vec![1.0; 4], vec![0.0; 3]]).unwrap();
        for seed in 0..20 {
            assert_eq!(coarsen_sample(&s, seed).counts, vec![4, 0]);
        }
    }

    #[test]
    fn coarsening_is_deterministic() {
        let s = RealSample::new(vec![vec![0.3, 0.6, 0.9], vec![0.5; 5]]).unwrap();
        assert_eq!(coarsen_sample(&s, 17), coarsen_sample(&s, 17));
    }

    #[test]
    fn out_of_range_outcome() {
        assert!(RealSample::new(vec![vec![0.2, 1.2]]).is_err());
    }

    #[test]
    fn binary_sample_is_literal() {
        let rule = es_rule(3, 2, EsVariant::Symmetric).unwrap();
        let s = RealSample::new(vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let e = coarsened_assignment_exact(&rule, &s).unwrap();
        assert_eq!(e, rule.at(&[2, 1]).to_vec());
    }

    #[test]
    fn shape_mismatch() {
        let rule = es_rule(3, 2, EsVariant::Symmetric).unwrap();
        let s = RealSample::new(vec![vec![1.0], vec![0.0, 1.0]]).unwrap();
        assert!(coarsened_assignment_exact(&rule, &s).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0, 1e-16, 1e-16, -1.0];
        assert!((compensated_sum(xs) - 2e-16).abs() < 1e-30);
    }

    #[test]
    fn point_mass_at_vertices_is_exact() {
        let spec = ProblemSpec::two_arm(3, 3).unwrap();
        let rule = es_rule(3, 3, EsVariant::Symmetric).unwrap();
        let mu = MeanVector::new(vec![1.0, 0.0]).unwrap();
        let (est, se) = coarsened_regret_mc(&rule, OutcomeLaw::PointMass, &mu, &spec, 50, 3).unwrap();
        assert_eq!(est, regret(&rule, &mu, &spec).unwrap());
        assert_eq!(se, 0.0);
        assert!(coarsened_regret_mc(&rule, OutcomeLaw::PointMass, &mu, &spec, 1, 3).is_err());
    }
}
