use crate::error::{Error, Result};
use crate::eval::{GridEvaluator, ScanRegion};
use crate::model::{MeanVector, NatureMixture, ParameterGrid, ProblemSpec, TreatmentRule};
use crate::prob::pmf_vector;
use crate::tensor::outer_product;

/// `E delta_t` when arm `a`'s success count has law `arm_laws[a]`, independently
/// across arms.
pub fn expected_assignment_under(rule: &TreatmentRule, arm_laws: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dims = rule.sample_space().dims();
    if arm_laws.len() != dims.len() || arm_laws.iter().zip(&dims).any(|(l, &d)| l.len() != d) {
        return Err(Error::ShapeMismatch(format!(
            "arm laws of lengths {:?} for sample dims {:?}",
            arm_laws.iter().map(Vec::len).collect::<Vec<_>>(),
            dims
        )));
    }
    let rows: Vec<&[f64]> = arm_laws.iter().map(Vec::as_slice).collect();
    let mut weights = vec![0.0; rule.num_samples()];
    outer_product(&rows, 1.0, &mut weights);
    let t = rule.num_treatments();
    let mut out = vec![0.0; t];
    for (w, &lw) in weights.iter().enumerate() {
        if lw == 0.0 {
            continue;
        }
        for (o, &d) in out.iter_mut().zip(rule.row(w)) {
            *o += lw * d;
        }
    }
    Ok(out)
}

/// `E_mu delta_t(w)` for every treatment under the problem's sampling design.
pub fn expected_assignment(rule: &TreatmentRule, mu: &MeanVector, spec: &ProblemSpec) -> Result<Vec<f64>> {
    rule.check_shape(spec)?;
    mu.check_for(spec)?;
    let laws = spec
        .observed_sizes()
        .iter()
        .zip(mu.as_slice())
        .map(|(&n, &m)| pmf_vector(n, m))
        .collect::<Result<Vec<_>>>()?;
    expected_assignment_under(rule, &laws)
}

/// `max_t mu_t - sum_t mu_t e_t`, with rounding noise below zero clamped.
pub fn regret_from_assignment(mu: &[f64], assignment: &[f64]) -> f64 {
    let best = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let achieved: f64 = mu.iter().zip(assignment).map(|(m, e)| m * e).sum();
    let r = best - achieved;
    debug_assert!(r > -1e-9, "regret {r} is negative beyond rounding");
    r.max(0.0)
}

pub fn regret(rule: &TreatmentRule, mu: &MeanVector, spec: &ProblemSpec) -> Result<f64> {
    let e = expected_assignment(rule, mu, spec)?;
    Ok(regret_from_assignment(mu.as_slice(), &e))
}

/// `sum_m p_m R(rule, mu_m)`.
pub fn regret_vs_mixture(rule: &TreatmentRule, nu: &NatureMixture, spec: &ProblemSpec) -> Result<f64> {
    if nu.is_empty() {
        return Err(Error::EmptyMixture);
    }
    let mut total = 0.0;
    for (_, mu, w) in nu.atoms_with_means(spec) {
        total += w * regret(rule, &mu, spec)?;
    }
    Ok(total)
}

/// Nature's grid search: an argmax of regret over the grid (lowest coordinates
/// on ties) and the maximal value.
pub fn max_regret_over_grid(rule: &TreatmentRule, grid: &ParameterGrid, spec: &ProblemSpec) -> Result<(MeanVector, f64)> {
    let eval = GridEvaluator::new(spec, grid)?;
    let (point, value) = eval.max_regret(rule, ScanRegion::Full)?;
    Ok((grid.mean_vector(&point, spec), value))
}
