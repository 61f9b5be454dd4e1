use proptest::prelude::*;
use regret_fp::coarsening::{coarsened_assignment_exact, coarsened_regret_mc, OutcomeLaw, RealSample};
use regret_fp::io::{read_rule_csv, read_rule_json, write_rule_csv, write_rule_json};
use regret_fp::prob::poisson_binom_pmf;
use regret_fp::*;

/// `C(n, k) mu^k (1 - mu)^(n - k)` by a running product.
fn binom(n: usize, k: usize, mu: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c * mu.powi(k as i32) * (1.0 - mu).powi((n - k) as i32)
}

/// Regret by enumerating every sample.
fn brute_regret(rule: &TreatmentRule, sizes: &[usize], means: &[f64]) -> f64 {
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut achieved = 0.0;
    for counts in SampleSpace::new(sizes.to_vec()).iter() {
        let p: f64 = counts.iter().zip(sizes).zip(means).map(|((&k, &n), &m)| binom(n, k, m)).product();
        achieved += p * rule.at(&counts).iter().zip(means).map(|(d, m)| d * m).sum::<f64>();
    }
    best - achieved
}

fn sym_two_arm(n1: usize, n2: usize, raw: &[f64]) -> TreatmentRule {
    let at = |a: usize, b: usize| raw[a * (n2 + 1) + b];
    TreatmentRule::from_fn(2, vec![n1, n2], |c| {
        let d = 0.5 * (at(c[0], c[1]) + 1.0 - at(n1 - c[0], n2 - c[1]));
        vec![1.0 - d, d]
    })
    .unwrap()
}

/// Three treatments, two innovation arms of size `nbar`, symmetric in the arms.
fn sym_innovation(nbar: usize, raw: &[f64]) -> TreatmentRule {
    let row = |a: usize, b: usize| {
        let i = 3 * (a * (nbar + 1) + b);
        let s = raw[i] + raw[i + 1] + raw[i + 2] + 1e-9;
        [raw[i] / s, raw[i + 1] / s, 1.0 - (raw[i] + raw[i + 1]) / s]
    };
    TreatmentRule::from_fn(3, vec![nbar, nbar], |c| {
        let x = row(c[0], c[1]);
        let y = row(c[1], c[0]);
        vec![0.5 * (x[0] + y[1]), 0.5 * (x[1] + y[0]), 0.5 * (x[2] + y[2])]
    })
    .unwrap()
}

fn two_arm_case() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (0usize..5, 1usize..5).prop_flat_map(|(n1, n2)| (Just(n1), Just(n2), prop::collection::vec(0.0..=1.0f64, (n1 + 1) * (n2 + 1))))
}

fn innovation_case() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..5).prop_flat_map(|n| (Just(n), prop::collection::vec(0.0..=1.0f64, 3 * (n + 1) * (n + 1))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mirror_regret_identity((n1, n2, raw) in two_arm_case(), m1 in 0.0..=1.0f64, m2 in 0.0..=1.0f64) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let rule = sym_two_arm(n1, n2, &raw);
        let r = regret(&rule, &MeanVector::new(vec![m1, m2]).unwrap(), &spec).unwrap();
        let rm = regret(&rule, &MeanVector::new(vec![1.0 - m1, 1.0 - m2]).unwrap(), &spec).unwrap();
        prop_assert!((r - rm).abs() <= 1e-12, "{r} vs {rm}");
    }

    #[test]
    fn permutation_regret_identity((n, raw) in innovation_case(), m1 in 0.0..=1.0f64, m2 in 0.0..=1.0f64, mt in 0.0..=1.0f64) {
        let spec = ProblemSpec::testing_innovations(3, n, mt).unwrap();
        let rule = sym_innovation(n, &raw);
        prop_assert!(check_perm_symmetry(&rule, n, 3) <= 1e-15);
        let r = regret(&rule, &MeanVector::new(vec![m1, m2, mt]).unwrap(), &spec).unwrap();
        let rs = regret(&rule, &MeanVector::new(vec![m2, m1, mt]).unwrap(), &spec).unwrap();
        prop_assert!((r - rs).abs() <= 1e-12, "{r} vs {rs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn regret_matches_enumeration((n1, n2, raw) in two_arm_case(), m1 in 0.0..=1.0f64, m2 in 0.0..=1.0f64) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let rule = TreatmentRule::from_fn(2, vec![n1, n2], |c| {
            let d = raw[c[0] * (n2 + 1) + c[1]];
            vec![1.0 - d, d]
        }).unwrap();
        let r = regret(&rule, &MeanVector::new(vec![m1, m2]).unwrap(), &spec).unwrap();
        prop_assert!((r - brute_regret(&rule, &[n1, n2], &[m1, m2])).abs() <= 1e-12);
    }

    #[test]
    fn innovation_regret_matches_enumeration((n, raw) in innovation_case(), m1 in 0.0..=1.0f64, m2 in 0.0..=1.0f64, mt in 0.0..=1.0f64) {
        let spec = ProblemSpec::testing_innovations(3, n, mt).unwrap();
        let rule = sym_innovation(n, &raw);
        let r = regret(&rule, &MeanVector::new(vec![m1, m2, mt]).unwrap(), &spec).unwrap();
        // The status quo contributes no sample, so its treatment weight just
        // multiplies the known mean.
        let best = m1.max(m2).max(mt);
        let mut achieved = 0.0;
        for c in SampleSpace::new(vec![n, n]).iter() {
            let p = binom(n, c[0], m1) * binom(n, c[1], m2);
            let d = rule.at(&c);
            achieved += p * (d[0] * m1 + d[1] * m2 + d[2] * mt);
        }
        prop_assert!((r - (best - achieved)).abs() <= 1e-12);
    }

    #[test]
    fn regret_is_linear_in_the_rule((n1, n2, raw) in two_arm_case(), a in 0.0..=1.0f64, m1 in 0.0..=1.0f64, m2 in 0.0..=1.0f64) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let mu = MeanVector::new(vec![m1, m2]).unwrap();
        let x = sym_two_arm(n1, n2, &raw);
        let y = es_rule(n1, n2, EsVariant::Symmetric).unwrap();
        let mix = TreatmentRule::from_fn(2, vec![n1, n2], |c| {
            x.at(c).iter().zip(y.at(c)).map(|(p, q)| a * p + (1.0 - a) * q).collect()
        }).unwrap();
        let lhs = regret(&mix, &mu, &spec).unwrap();
        let rhs = a * regret(&x, &mu, &spec).unwrap() + (1.0 - a) * regret(&y, &mu, &spec).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn regret_is_bounded((n1, n2, raw) in two_arm_case(), m1 in 0.0..=1.0f64, m2 in 0.0..=1.0f64) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let rule = sym_two_arm(n1, n2, &raw);
        let r = regret(&rule, &MeanVector::new(vec![m1, m2]).unwrap(), &spec).unwrap();
        prop_assert!(r >= -1e-15 && r <= (m1 - m2).abs() + 1e-15);
    }

    #[test]
    fn poisson_binomial_reduces_to_binomial(n in 0usize..40, mu in 0.0..=1.0f64) {
        let pmf = poisson_binom_pmf(&vec![mu; n]).unwrap();
        prop_assert_eq!(pmf.len(), n + 1);
        for (k, p) in pmf.iter().enumerate() {
            prop_assert!((p - binom(n, k, mu)).abs() <= 1e-12, "k={} {} vs {}", k, p, binom(n, k, mu));
        }
    }

    #[test]
    fn poisson_binomial_sums_to_one(ps in prop::collection::vec(0.0..=1.0f64, 0..30)) {
        let pmf = poisson_binom_pmf(&ps).unwrap();
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(pmf.iter().all(|&p| p >= 0.0));
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        prop_assert!((mean - ps.iter().sum::<f64>()).abs() <= 1e-10);
    }

    #[test]
    fn coarsening_constant_outcomes((n1, n2, raw) in two_arm_case(), m1 in 0.0..=1.0f64, m2 in 0.0..=1.0f64) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let rule = sym_two_arm(n1, n2, &raw);
        let sample = RealSample::new(vec![vec![m1; n1], vec![m2; n2]]).unwrap();
        let exact = coarsened_assignment_exact(&rule, &sample).unwrap();
        let binary = expected_assignment(&rule, &MeanVector::new(vec![m1, m2]).unwrap(), &spec).unwrap();
        for (a, b) in exact.iter().zip(&binary) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn mirror_half_scan_is_enough((n1, n2, raw) in two_arm_case(), p in 1usize..50) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let grid = ParameterGrid::unrestricted(p, 2).unwrap();
        let eval = GridEvaluator::new(&spec, &grid).unwrap();
        let rule = sym_two_arm(n1, n2, &raw);
        let full = eval.max_regret(&rule, ScanRegion::Full).unwrap().1;
        let half = eval.max_regret(&rule, ScanRegion::MirrorHalf).unwrap().1;
        prop_assert!((full - half).abs() <= 1e-12, "{full} vs {half}");
    }

    #[test]
    fn sorted_scan_is_enough((n, raw) in innovation_case(), p in 1usize..30, mt in 0.0..=1.0f64) {
        let spec = ProblemSpec::testing_innovations(3, n, mt).unwrap();
        let grid = ParameterGrid::unrestricted(p, 2).unwrap();
        let eval = GridEvaluator::new(&spec, &grid).unwrap();
        let rule = sym_innovation(n, &raw);
        let full = eval.max_regret(&rule, ScanRegion::Full).unwrap().1;
        let sorted = eval.max_regret(&rule, ScanRegion::Sorted).unwrap().1;
        prop_assert!((full - sorted).abs() <= 1e-12, "{full} vs {sorted}");
    }

    #[test]
    fn grid_scan_matches_pointwise_regret((n1, n2, raw) in two_arm_case(), p in 1usize..12) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let grid = ParameterGrid::unrestricted(p, 2).unwrap();
        let rule = sym_two_arm(n1, n2, &raw);
        let (_, v) = max_regret_over_grid(&rule, &grid, &spec).unwrap();
        let brute = grid
            .points()
            .map(|pt| brute_regret(&rule, &[n1, n2], grid.mean_vector(&pt, &spec).as_slice()))
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((v - brute).abs() <= 1e-12);
    }

    #[test]
    fn json_round_trip_keeps_regret((n1, n2, raw) in two_arm_case(), m1 in 0.0..=1.0f64, m2 in 0.0..=1.0f64) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let rule = sym_two_arm(n1, n2, &raw);
        let mut buf = Vec::new();
        write_rule_json(&rule, &mut buf).unwrap();
        let back = read_rule_json(buf.as_slice()).unwrap();
        let mu = MeanVector::new(vec![m1, m2]).unwrap();
        prop_assert!((regret(&rule, &mu, &spec).unwrap() - regret(&back, &mu, &spec).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn csv_round_trip_on_six_decimals((n1, n2, raw) in two_arm_case()) {
        let rule = TreatmentRule::from_fn(2, vec![n1, n2], |c| {
            let d = (raw[c[0] * (n2 + 1) + c[1]] * 1e6).round() / 1e6;
            vec![1.0 - d, d]
        }).unwrap();
        let mut buf = Vec::new();
        write_rule_csv(&rule, &mut buf).unwrap();
        let back = read_rule_csv(buf.as_slice()).unwrap();
        for counts in rule.sample_space().iter() {
            prop_assert_eq!(rule.at(&counts)[1], back.at(&counts)[1]);
        }
    }
}

fn random_mixture(p: usize, free_dims: usize, raw: &[(Vec<u32>, f64)]) -> NatureMixture {
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    NatureMixture::from_weights(
        p,
        raw.iter().map(|(c, w)| (GridPoint(c.iter().take(free_dims).map(|x| x % (p as u32 + 1)).collect()), w / total)),
    )
    .unwrap()
}

fn atoms() -> impl Strategy<Value = Vec<(Vec<u32>, f64)>> {
    prop::collection::vec((prop::collection::vec(0u32..=10, 2), 0.05..1.0f64), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// The Bayes response is no worse than every nonrandomized rule.
    #[test]
    fn bayes_response_beats_all_pure_rules(sizes in prop_oneof![Just((1usize, 1usize)), Just((1, 3)), Just((3, 1)), Just((3, 3)), Just((0, 4)), Just((2, 4))], raw in atoms()) {
        let (n1, n2) = sizes;
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let nu = random_mixture(10, 2, &raw);
        let space = SampleSpace::new(vec![n1, n2]);
        let w_count = space.len();
        prop_assert!(w_count <= 16);

        // loss[w][t]: prior-weighted regret contribution of treatment t at w.
        let mut loss = vec![[0.0f64; 2]; w_count];
        for (pt, weight) in nu.iter() {
            let mu = [pt.coords()[0] as f64 / 10.0, pt.coords()[1] as f64 / 10.0];
            let best = mu[0].max(mu[1]);
            for (w, c) in space.iter().enumerate() {
                let p = binom(n1, c[0], mu[0]) * binom(n2, c[1], mu[1]);
                for t in 0..2 {
                    loss[w][t] += weight * p * (best - mu[t]);
                }
            }
        }
        let mut best_pure = f64::INFINITY;
        for mask in 0u32..(1 << w_count) {
            let v: f64 = (0..w_count).map(|w| loss[w][((mask >> w) & 1) as usize]).sum();
            best_pure = best_pure.min(v);
        }

        let lower = lower_bound_value(&nu, &spec).unwrap();
        prop_assert!((lower - best_pure).abs() <= 1e-12, "{lower} vs {best_pure}");
        let rule = policymaker_best_response(&nu, &spec, TiePolicy::SplitEqually).unwrap();
        let r = regret_vs_mixture(&rule, &nu, &spec).unwrap();
        prop_assert!((r - best_pure).abs() <= 1e-12);
    }

    /// Under a mirror-closed mixture the center sample is a tie, so putting
    /// exactly 1/2 there costs nothing.
    #[test]
    fn center_half_is_bayes_for_mirrored_mixtures(n1 in (0usize..3).prop_map(|n| 2 * n), n2 in (1usize..3).prop_map(|n| 2 * n), raw in atoms()) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let grid = ParameterGrid::unrestricted(10, 2).unwrap();
        let nu = random_mixture(10, 2, &raw);
        let mirrored = NatureMixture::from_weights(10, nu.iter().flat_map(|(pt, w)| [(pt.clone(), w), (grid.mirror(pt), w)])).unwrap();
        let split = policymaker_best_response(&mirrored, &spec, TiePolicy::SplitEqually).unwrap();
        let center = policymaker_best_response(&mirrored, &spec, TiePolicy::CenterHalf).unwrap();
        prop_assert_eq!(center.delta2(n1 / 2, n2 / 2), 0.5);
        let a = regret_vs_mixture(&split, &mirrored, &spec).unwrap();
        let b = regret_vs_mixture(&center, &mirrored, &spec).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    /// Lower bounds never exceed any rule's worst case.
    #[test]
    fn lower_bound_below_every_upper_bound((n1, n2, raw) in two_arm_case(), nu_raw in atoms()) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let grid = ParameterGrid::unrestricted(10, 2).unwrap();
        let nu = random_mixture(10, 2, &nu_raw);
        let rule = sym_two_arm(n1, n2, &raw);
        let lower = lower_bound_value(&nu, &spec).unwrap();
        let upper = max_regret_over_grid(&rule, &grid, &spec).unwrap().1;
        prop_assert!(lower <= regret_vs_mixture(&rule, &nu, &spec).unwrap() + 1e-12);
        prop_assert!(regret_vs_mixture(&rule, &nu, &spec).unwrap() <= upper + 1e-12);
    }
}

fn schedule() -> impl Strategy<Value = WeightSchedule> {
    prop_oneof![
        Just(WeightSchedule::Robinson),
        (0.0..10.0f64, 0.3..=1.0f64).prop_map(|(c, eta)| WeightSchedule::LeslieCollins { c, eta }),
        (1.5..10.0f64).prop_map(|c| WeightSchedule::LogDamped { c }),
    ]
}

fn check_trace(report: &SolveReport) -> std::result::Result<(), TestCaseError> {
    let mut min_upper = f64::INFINITY;
    for row in &report.trace {
        min_upper = min_upper.min(row.upper);
        prop_assert!(row.lower <= min_upper + 1e-12, "iteration {}: lower {} above {}", row.iter, row.lower, min_upper);
    }
    prop_assert_eq!(report.best_upper, min_upper);
    prop_assert_eq!(report.interval.1, min_upper);
    let running = report.running_interval();
    for w in running.windows(2) {
        prop_assert!(w[1].0 >= w[0].0 && w[1].1 <= w[0].1);
    }
    prop_assert!(report.interval.0 <= report.interval.1 + 1e-12);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn general_solve_brackets(n1 in 0usize..4, n2 in 1usize..4, p in 2usize..16, iters in 1usize..40, weights in schedule(), restrict in any::<bool>()) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let constraint = if restrict { Constraint::RatioBand { lo: 0.9, hi: 1.2 } } else { Constraint::Unrestricted };
        let grid = ParameterGrid::for_spec(&spec, p, constraint).unwrap();
        let init = es_rule(n1, n2, EsVariant::TiesToTwo).unwrap();
        let report = solve(&SolveConfig::new(spec, grid, init).with_weights(weights).with_max_iters(iters)).unwrap();
        check_trace(&report)?;
    }

    #[test]
    fn symmetric_solve_brackets(n1 in 0usize..4, n2 in 1usize..4, p in 1usize..16, iters in 1usize..40, weights in schedule()) {
        let spec = ProblemSpec::two_arm(n1, n2).unwrap();
        let grid = ParameterGrid::unrestricted(p, 2).unwrap();
        let init = so_rule(n1, n2).unwrap();
        let report = solve_symmetric(&SolveConfig::new(spec, grid, init).with_weights(weights).with_max_iters(iters)).unwrap();
        check_trace(&report)?;
        prop_assert!(check_symmetry(&report.final_rule, n1, n2) <= 1e-10);
        prop_assert!(check_symmetry(&report.best_rule, n1, n2) <= 1e-10);
    }

    #[test]
    fn innovation_solve_brackets(n in 1usize..4, mt in 0.0..=1.0f64, p in 1usize..16, iters in 1usize..30, weights in schedule()) {
        let spec = ProblemSpec::testing_innovations(3, n, mt).unwrap();
        let grid = ParameterGrid::unrestricted(p, 2).unwrap();
        let init = es_rule_innovations(n, 3, mt).unwrap();
        let report = solve_innovations(&SolveConfig::new(spec, grid, init).with_weights(weights).with_max_iters(iters)).unwrap();
        check_trace(&report)?;
        prop_assert!(check_perm_symmetry(&report.final_rule, n, 3) <= 1e-10);
    }
}

#[test]
fn solves_are_deterministic_across_thread_counts() {
    let spec = ProblemSpec::two_arm(4, 6).unwrap();
    let grid = ParameterGrid::unrestricted(60, 2).unwrap();
    let config = SolveConfig::new(spec, grid, es_rule(4, 6, EsVariant::Symmetric).unwrap()).with_max_iters(40);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| solve(&config).unwrap())
    };
    let a = run(1);
    let b = run(4);
    let c = run(4);
    assert_eq!(a.trace, b.trace);
    assert_eq!(b.trace, c.trace);
    assert_eq!(a.best_rule, b.best_rule);
}

#[test]
fn mc_regret_of_coarsened_rule_is_unbiased() {
    let spec = ProblemSpec::two_arm(5, 5).unwrap();
    let rule = es_rule(5, 5, EsVariant::Symmetric).unwrap();
    let mu = MeanVector::new(vec![0.45, 0.6]).unwrap();
    let exact = regret(&rule, &mu, &spec).unwrap();
    for law in [OutcomeLaw::Bernoulli, OutcomeLaw::Beta { concentration: 2.0 }, OutcomeLaw::PointMass] {
        let (est, se) = coarsened_regret_mc(&rule, law, &mu, &spec, 20_000, 11).unwrap();
        assert!(se > 0.0);
        assert!((est - exact).abs() <= 4.0 * se, "{law:?}: {est} ± {se} vs {exact}");
        let again = coarsened_regret_mc(&rule, law, &mu, &spec, 20_000, 11).unwrap();
        assert_eq!((est, se), again);
    }
}

#[test]
fn status_quo_at_one_is_never_beaten() {
    let spec = ProblemSpec::testing_innovations(2, 4, 1.0).unwrap();
    let grid = ParameterGrid::unrestricted(40, 1).unwrap();
    let nu = NatureMixture::point_mass(40, GridPoint(vec![23]));
    let stay = policymaker_best_response(&nu, &spec, TiePolicy::SplitEqually).unwrap();
    assert!(stay.probs().chunks(2).all(|row| row == [0.0, 1.0]));
    assert_eq!(max_regret_over_grid(&stay, &grid, &spec).unwrap().1, 0.0);

    let init = es_rule_innovations(4, 2, 1.0).unwrap();
    let report = solve_innovations(&SolveConfig::new(spec, grid, init).with_max_iters(200)).unwrap();
    assert!(report.trace.iter().all(|r| r.lower.abs() <= 1e-12));
    assert!(report.best_upper < 0.1 * report.trace[0].upper);
}

#[test]
fn status_quo_at_zero_leaves_the_balanced_problem() {
    let n = 5;
    let spec = ProblemSpec::testing_innovations(3, n, 0.0).unwrap();
    let grid = ParameterGrid::unrestricted(200, 2).unwrap();
    let init = es_rule_innovations(n, 3, 0.0).unwrap();
    let report = solve_innovations(&SolveConfig::new(spec, grid, init).with_max_iters(300)).unwrap();
    let minimax = lookup_reference("I", "N=5,5", "minimax").unwrap()[0];
    assert!((report.best_upper - minimax).abs() <= 5e-4, "{} vs {minimax}", report.best_upper);
}

#[test]
fn n1_zero_rule_examples() {
    let spec = ProblemSpec::two_arm(0, 4).unwrap();
    let rule = n1_zero_rule(4).unwrap();
    assert_eq!(rule.delta2(0, 0), 0.0);
    assert_eq!(rule.delta2(0, 1), 0.25);
    assert_eq!(rule.delta2(0, 4), 1.0);
    // Against an even mixture of (0, 1/2) and (1, 1/2) every rule has regret 1/4.
    let r = regret(&rule, &MeanVector::new(vec![0.0, 0.5]).unwrap(), &spec).unwrap();
    assert!((r - 0.25).abs() <= 1e-15);
}
