//! Testing innovations: `T - 1` new treatments with samples of a common size
//! and a status quo (the last treatment) whose mean is known.
//!
//! Rules are kept permutation-symmetric in the innovation arms, so nature
//! only needs to search sorted mean vectors and plays whole orbits.

use crate::engine::{run, SolveConfig, SolveReport, Symmetry};
use crate::error::{domain, Error, Result};
use crate::model::{Design, ProblemSpec, TreatmentRule};

/// All `k!` orderings of `0..k`, lexicographic.
fn index_permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Every rearrangement of `coords`, one per permutation (repeats included).
pub fn all_permutations(coords: &[u32]) -> Vec<Vec<u32>> {
    index_permutations(coords.len())
        .into_iter()
        .map(|perm| perm.iter().map(|&i| coords[i]).collect())
        .collect()
}

/// Distinct rearrangements of `coords`, sorted.
pub fn permutations(coords: &[u32]) -> Vec<Vec<u32>> {
    let mut all = all_permutations(coords);
    all.sort();
    all.dedup();
    all
}

/// Empirical success rule against the known status quo: split evenly over
/// every treatment attaining `max(n_1/N, ..., n_{T-1}/N, mu_T)`.
pub fn es_rule_innovations(nbar: usize, num_treatments: usize, mu_t: f64) -> Result<TreatmentRule> {
    if num_treatments < 2 {
        return domain(format!("need at least two treatments, got {num_treatments}"));
    }
    if nbar == 0 {
        return domain("innovation sample size must be positive");
    }
    if !(0.0..=1.0).contains(&mu_t) {
        return domain(format!("status quo mean {mu_t} outside [0, 1]"));
    }
    let k = num_treatments - 1;
    TreatmentRule::from_fn(num_treatments, vec![nbar; k], |c| {
        let rates: Vec<f64> = c.iter().map(|&n| n as f64 / nbar as f64).collect();
        let top = rates.iter().copied().fold(mu_t, f64::max);
        let mut row: Vec<f64> = rates.iter().map(|&r| if r == top { 1.0 } else { 0.0 }).collect();
        row.push(if mu_t == top { 1.0 } else { 0.0 });
        let count: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= count);
        row
    })
}

/// `max |delta_{pi(a)}(pi w) - delta_a(w)|` over samples, arm permutations and
/// treatments (the status quo is fixed by every permutation).
pub fn check_perm_symmetry(rule: &TreatmentRule, nbar: usize, num_treatments: usize) -> f64 {
    let k = num_treatments.saturating_sub(1);
    if rule.num_treatments() != num_treatments || rule.arm_sizes() != vec![nbar; k].as_slice() {
        return f64::INFINITY;
    }
    let space = rule.sample_space();
    let perms = index_permutations(k);
    let mut worst = 0.0f64;
    for counts in space.iter() {
        let here = rule.at(&counts);
        for perm in &perms {
            let moved = permute_counts(&counts, perm);
            let there = rule.at(&moved);
            for a in 0..k {
                worst = worst.max((there[perm[a]] - here[a]).abs());
            }
            worst = worst.max((there[k] - here[k]).abs());
        }
    }
    worst
}

/// Sample `w'` with `w'[perm[a]] = w[a]`.
fn permute_counts(counts: &[usize], perm: &[usize]) -> Vec<usize> {
    let mut out = vec![0; counts.len()];
    for (a, &c) in counts.iter().enumerate() {
        out[perm[a]] = c;
    }
    out
}

/// Replaces the rule by its average over arm relabelings.
pub(crate) fn symmetrize(rule: &mut TreatmentRule) {
    let k = rule.sample_space().num_arms();
    if k < 2 {
        return;
    }
    let t_count = rule.num_treatments();
    let space = rule.sample_space().clone();
    let orig = rule.clone();
    let perms = index_permutations(k);
    let scale = 1.0 / perms.len() as f64;
    let mut acc = vec![0.0; t_count];
    for (w, counts) in space.iter().enumerate() {
        acc.iter_mut().for_each(|x| *x = 0.0);
        for perm in &perms {
            let there = orig.at(&permute_counts(&counts, perm));
            for a in 0..k {
                acc[a] += there[perm[a]];
            }
            acc[k] += there[k];
        }
        for (x, &s) in rule.row_mut(w).iter_mut().zip(&acc) {
            *x = s * scale;
        }
    }
}

/// Fictitious play over permutation-symmetric rules against orbit-mixing
/// nature.
pub fn solve_innovations(config: &SolveConfig) -> Result<SolveReport> {
    let spec: &ProblemSpec = &config.spec;
    if spec.design() != Design::TestingInnovations {
        return Err(Error::InvalidConfig("the innovations solver needs a testing-innovations problem".into()));
    }
    if !config.grid.constraint().is_unrestricted() {
        return Err(Error::InvalidConfig(
            "restricted grids break the permutation symmetry; use the general solver".into(),
        ));
    }
    let nbar = spec.observed_sizes()[0];
    let asym = check_perm_symmetry(&config.init_rule, nbar, spec.num_treatments());
    if asym > 1e-10 {
        return Err(Error::InvalidConfig(format!(
            "initial rule is not permutation-symmetric (deviation {asym:.3e})"
        )));
    }
    run(config, Symmetry::Permutation)
}
