//! Best responses of both players.
//!
//! Nature's response is a grid search. The policymaker's response to a
//! mixture is Bayes: at each sample pick the treatment with the largest
//! posterior mean, which reduces to comparing the unnormalized scores
//! `S_t(w) = sum_m p_m mu_tm L(w | mu_m)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::GridEvaluator;
use crate::model::{max_regret_over_grid, MeanVector, NatureMixture, ParameterGrid, ProblemSpec, SampleSpace, TreatmentRule};
use crate::prob::pmf_vector;
use crate::tensor::outer_product;

/// Scores within `BAYES_TIE_TOL * P(w)` of the maximum count as tied.
pub const BAYES_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    SplitEqually,
    /// Split ties equally and, for two arms with even sample sizes, put
    /// exactly 1/2 on each treatment at the center sample.
    CenterHalf,
}

/// Unnormalized posterior scores and evidence of every sample under a mixture.
#[derive(Debug, Clone)]
pub struct BayesScores {
    space: SampleSpace,
    num_treatments: usize,
    evidence: Vec<f64>,
    scores: Vec<f64>,
    prior_best: f64,
}

/// One mixture atom: per-arm pmf rows, the full mean vector, and its weight.
pub(crate) struct Atom<'a> {
    pub rows: Vec<&'a [f64]>,
    pub means: Vec<f64>,
    pub weight: f64,
}

impl BayesScores {
    pub(crate) fn zeros(space: SampleSpace, num_treatments: usize) -> Self {
        let w = space.len();
        Self {
            space,
            num_treatments,
            evidence: vec![0.0; w],
            scores: vec![0.0; w * num_treatments],
            prior_best: 0.0,
        }
    }

    /// Scores of `nu`, with likelihoods evaluated directly.
    pub fn from_mixture(nu: &NatureMixture, spec: &ProblemSpec) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let sizes = spec.observed_sizes();
        let mut laws = Vec::with_capacity(nu.support_size());
        for (_, mu, w) in nu.atoms_with_means(spec) {
            let rows = sizes
                .iter()
                .zip(mu.as_slice())
                .map(|(&n, &m)| pmf_vector(n, m))
                .collect::<Result<Vec<_>>>()?;
            laws.push((rows, mu.as_slice().to_vec(), w));
        }
        let atoms: Vec<Atom<'_>> = laws
            .iter()
            .map(|(rows, means, w)| Atom {
                rows: rows.iter().map(Vec::as_slice).collect(),
                means: means.clone(),
                weight: *w,
            })
            .collect();
        let mut s = Self::zeros(spec.sample_space(), spec.num_treatments());
        s.add_atoms(&atoms);
        Ok(s)
    }

    /// Scores of `nu`, reusing the evaluator's pmf tables.
    pub fn from_evaluator(eval: &GridEvaluator, nu: &NatureMixture) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let spec = eval.spec();
        let atoms: Vec<Atom<'_>> = nu
            .atoms_with_means(spec)
            .map(|(p, mu, w)| Atom {
                rows: eval.atom_rows(p),
                means: mu.as_slice().to_vec(),
                weight: w,
            })
            .collect();
        let mut s = Self::zeros(spec.sample_space(), spec.num_treatments());
        s.add_atoms(&atoms);
        Ok(s)
    }

    /// Multiplies every score by `factor`.
    pub(crate) fn scale(&mut self, factor: f64) {
        self.evidence.iter_mut().for_each(|x| *x *= factor);
        self.scores.iter_mut().for_each(|x| *x *= factor);
        self.prior_best *= factor;
    }

    /// Adds the atoms' contributions. Work is split by the first arm's count,
    /// and within a chunk atoms are added in the given order.
    pub(crate) fn add_atoms(&mut self, atoms: &[Atom<'_>]) {
        let t_count = self.num_treatments;
        for a in atoms {
            let top = a.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            self.prior_best += a.weight * top;
        }
        let sizes = self.space.sizes();
        if sizes.is_empty() {
            return;
        }
        let stride: usize = sizes[1..].iter().map(|n| n + 1).product();
        let fill = |(n1, (ev, sc)): (usize, (&mut [f64], &mut [f64]))| {
            let mut tmp = vec![0.0; stride];
            for a in atoms {
                let factor = a.weight * a.rows[0][n1];
                if factor == 0.0 {
                    continue;
                }
                outer_product(&a.rows[1..], factor, &mut tmp);
                for (j, &l) in tmp.iter().enumerate() {
                    ev[j] += l;
                    let row = &mut sc[j * t_count..(j + 1) * t_count];
                    for (s, &m) in row.iter_mut().zip(&a.means) {
                        *s += m * l;
                    }
                }
            }
        };
        if self.evidence.len() * atoms.len() >= 1 << 12 {
            self.evidence
                .par_chunks_mut(stride)
                .zip(self.scores.par_chunks_mut(stride * t_count))
                .enumerate()
                .for_each(fill);
        } else {
            self.evidence
                .chunks_mut(stride)
                .zip(self.scores.chunks_mut(stride * t_count))
                .enumerate()
                .for_each(fill);
        }
    }

    pub fn num_treatments(&self) -> usize {
        self.num_treatments
    }

    pub fn sample_space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn evidence(&self, w: usize) -> f64 {
        self.evidence[w]
    }

    pub fn scores(&self, w: usize) -> &[f64] {
        &self.scores[w * self.num_treatments..(w + 1) * self.num_treatments]
    }

    /// `sum_m p_m max_t mu_tm`.
    pub fn prior_best(&self) -> f64 {
        self.prior_best
    }

    /// Treatments whose score is within tolerance of the maximum at sample `w`.
    pub fn argmax_set(&self, w: usize) -> Vec<usize> {
        let s = self.scores(w);
        let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = BAYES_TIE_TOL * self.evidence[w];
        (0..s.len()).filter(|&t| s[t] >= top - tol).collect()
    }

    /// The Bayes rule: all mass on the best-scoring treatment, ties resolved
    /// by `policy`.
    pub fn bayes_rule(&self, policy: TiePolicy) -> TreatmentRule {
        let t_count = self.num_treatments;
        let mut probs = vec![0.0; self.scores.len()];
        for w in 0..self.space.len() {
            let set = self.argmax_set(w);
            let share = 1.0 / set.len() as f64;
            for t in set {
                probs[w * t_count + t] = share;
            }
        }
        if policy == TiePolicy::CenterHalf && t_count == 2 && self.space.num_arms() == 2 {
            let sizes = self.space.sizes();
            if sizes.iter().all(|n| n % 2 == 0) {
                let w = self.space.flat(&[sizes[0] / 2, sizes[1] / 2]);
                probs[2 * w] = 0.5;
                probs[2 * w + 1] = 0.5;
            }
        }
        TreatmentRule::from_probs(t_count, self.space.sizes().to_vec(), probs)
            .expect("Bayes rule rows lie on the simplex")
    }

    /// `R(rule, nu) = sum_m p_m max_t mu_tm - sum_w sum_t delta_t(w) S_t(w)`.
    pub fn mixture_regret(&self, rule: &TreatmentRule) -> f64 {
        let achieved: f64 = rule
            .probs()
            .par_chunks(self.num_treatments * 1024)
            .zip(self.scores.par_chunks(self.num_treatments * 1024))
            .map(|(d, s)| crate::tensor::dot(d, s))
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        (self.prior_best - achieved).max(0.0)
    }
}

pub fn nature_best_response(rule: &TreatmentRule, grid: &ParameterGrid, spec: &ProblemSpec) -> Result<(MeanVector, f64)> {
    max_regret_over_grid(rule, grid, spec)
}

pub fn policymaker_best_response(nu: &NatureMixture, spec: &ProblemSpec, tie_policy: TiePolicy) -> Result<TreatmentRule> {
    nu.check_normalized()?;
    Ok(BayesScores::from_mixture(nu, spec)?.bayes_rule(tie_policy))
}

/// `min_delta R(delta, nu)`, attained by the Bayes rule.
pub fn lower_bound_value(nu: &NatureMixture, spec: &ProblemSpec) -> Result<f64> {
    nu.check_normalized()?;
    let scores = BayesScores::from_mixture(nu, spec)?;
    Ok(scores.mixture_regret(&scores.bayes_rule(TiePolicy::SplitEqually)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{regret_vs_mixture, GridPoint};

    #[test]
    fn point_mass_picks_better_arm() {
        let spec = ProblemSpec::two_arm(2, 3).unwrap();
        let nu = NatureMixture::point_mass(10, GridPoint(vec![3, 6]));
        let r = policymaker_best_response(&nu, &spec, TiePolicy::SplitEqually).unwrap();
        assert!(r.probs().chunks(2).all(|row| row == [0.0, 1.0]));
        assert!(lower_bound_value(&nu, &spec).unwrap().abs() < 1e-15);
    }

    #[test]
    fn lfd_for_unobserved_first_arm() {
        let spec = ProblemSpec::two_arm(0, 4).unwrap();
        let nu = NatureMixture::from_weights(2, vec![(GridPoint(vec![0, 1]), 1.0), (GridPoint(vec![2, 1]), 1.0)]).unwrap();
        let r = policymaker_best_response(&nu, &spec, TiePolicy::SplitEqually).unwrap();
        assert!(r.probs().iter().all(|&x| x == 0.5));
        assert!((lower_bound_value(&nu, &spec).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn two_symmetric_atoms_on_one_by_one() {
        let spec = ProblemSpec::two_arm(1, 1).unwrap();
        let nu = NatureMixture::from_weights(10, vec![(GridPoint(vec![2, 8]), 1.0), (GridPoint(vec![8, 2]), 1.0)]).unwrap();
        let r = policymaker_best_response(&nu, &spec, TiePolicy::SplitEqually).unwrap();
        assert_eq!(r.delta2(0, 1), 1.0);
        assert_eq!(r.delta2(1, 0), 0.0);
        assert_eq!(r.delta2(0, 0), 0.5);
        assert_eq!(r.delta2(1, 1), 0.5);
    }

    #[test]
    fn center_half_forces_center() {
        let spec = ProblemSpec::two_arm(2, 2).unwrap();
        let nu = NatureMixture::point_mass(4, GridPoint(vec![1, 3]));
        let r = policymaker_best_response(&nu, &spec, TiePolicy::CenterHalf).unwrap();
        assert_eq!(r.delta2(1, 1), 0.5);
        assert_eq!(r.delta2(0, 0), 1.0);
    }

    #[test]
    fn score_identity_matches_direct_mixture_regret() {
        let spec = ProblemSpec::two_arm(2, 3).unwrap();
        let nu = NatureMixture::from_weights(
            8,
            vec![(GridPoint(vec![1, 5]), 0.2), (GridPoint(vec![6, 2]), 0.5), (GridPoint(vec![4, 4]), 0.3)],
        )
        .unwrap();
        let scores = BayesScores::from_mixture(&nu, &spec).unwrap();
        let rule = TreatmentRule::from_fn(2, vec![2, 3], |c| {
            let d = ((c[0] * 7 + c[1] * 3) % 5) as f64 / 4.0;
            vec![1.0 - d, d]
        })
        .unwrap();
        let direct = regret_vs_mixture(&rule, &nu, &spec).unwrap();
        assert!((scores.mixture_regret(&rule) - direct).abs() < 1e-14);
        for w in 0..scores.sample_space().len() {
            assert!(scores.scores(w).iter().all(|&s| s <= scores.evidence(w) + 1e-16));
        }
    }

    #[test]
    fn status_quo_score_is_proportional_to_evidence() {
        let spec = ProblemSpec::testing_innovations(3, 3, 0.35).unwrap();
        let nu = NatureMixture::from_weights(5, vec![(GridPoint(vec![1, 4]), 0.6), (GridPoint(vec![3, 0]), 0.4)]).unwrap();
        let scores = BayesScores::from_mixture(&nu, &spec).unwrap();
        for w in 0..scores.sample_space().len() {
            let s = scores.scores(w)[2];
            assert!((s - 0.35 * scores.evidence(w)).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_mixture_is_rejected() {
        let spec = ProblemSpec::two_arm(1, 1).unwrap();
        let nu = NatureMixture::empty(4);
        assert!(policymaker_best_response(&nu, &spec, TiePolicy::SplitEqually).is_err());
        assert!(lower_bound_value(&nu, &spec).is_err());
    }
}
