//! Two treatments with unbalanced samples, restricted to rules that treat the
//! arms symmetrically: `delta_2(n_1, n_2) + delta_2(N_1 - n_1, N_2 - n_2) = 1`.

use std::cmp::Ordering;

use crate::engine::{run, SolveConfig, SolveReport, Symmetry};
use crate::error::{domain, Error, Result};
use crate::model::TreatmentRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EsVariant {
    /// Equal rates go to the arm the common rate favors; 1/2 when it is 1/2.
    #[default]
    Symmetric,
    /// Equal rates always go to treatment 2.
    TiesToTwo,
    /// As `Symmetric` with the arms' roles exchanged: equal rates above 1/2
    /// go to treatment 1, below 1/2 to treatment 2.
    Reflected,
}

/// Success rate as an exact fraction; an arm without observations counts as 1/2.
fn rate(n: usize, size: usize) -> (u64, u64) {
    if size == 0 {
        (1, 2)
    } else {
        (n as u64, size as u64)
    }
}

fn cmp_rate(a: (u64, u64), b: (u64, u64)) -> Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

fn two_arm_rule(n1: usize, n2: usize, f: impl Fn(usize, usize) -> f64) -> Result<TreatmentRule> {
    if n1 == 0 && n2 == 0 {
        return domain("both arms have empty samples");
    }
    TreatmentRule::from_fn(2, vec![n1, n2], |c| {
        let d = f(c[0], c[1]);
        vec![1.0 - d, d]
    })
}

/// Empirical success rule.
pub fn es_rule(n1: usize, n2: usize, variant: EsVariant) -> Result<TreatmentRule> {
    two_arm_rule(n1, n2, |a, b| {
        let (r1, r2) = (rate(a, n1), rate(b, n2));
        match (cmp_rate(r1, r2), variant) {
            (Ordering::Less, _) => 1.0,
            (Ordering::Greater, _) => 0.0,
            (Ordering::Equal, EsVariant::TiesToTwo) => 1.0,
            (Ordering::Equal, EsVariant::Symmetric) => match cmp_rate(r1, (1, 2)) {
                Ordering::Greater => 1.0,
                Ordering::Less => 0.0,
                Ordering::Equal => 0.5,
            },
            (Ordering::Equal, EsVariant::Reflected) => match cmp_rate(r1, (1, 2)) {
                Ordering::Greater => 0.0,
                Ordering::Less => 1.0,
                Ordering::Equal => 0.5,
            },
        }
    })
}

/// The deliberately poor start: decide on arm 1's rate alone, using arm 2
/// only when arm 1 sits exactly at one half.
pub fn so_rule(n1: usize, n2: usize) -> Result<TreatmentRule> {
    two_arm_rule(n1, n2, |a, b| {
        let half = (1, 2);
        match cmp_rate(rate(a, n1), half) {
            Ordering::Less => 1.0,
            Ordering::Greater => 0.0,
            Ordering::Equal => match cmp_rate(rate(b, n2), half) {
                Ordering::Less => 1.0,
                Ordering::Greater => 0.0,
                Ordering::Equal => 0.5,
            },
        }
    })
}

/// `max_w |delta_2(w) + delta_2(w') - 1|` over complementary samples.
pub fn check_symmetry(rule: &TreatmentRule, n1: usize, n2: usize) -> f64 {
    if rule.num_treatments() != 2 || rule.arm_sizes() != [n1, n2] {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for a in 0..=n1 {
        for b in 0..=n2 {
            let d = rule.delta2(a, b) + rule.delta2(n1 - a, n2 - b) - 1.0;
            worst = worst.max(d.abs());
        }
    }
    worst
}

/// `delta_2(w) <- (delta_2(w) + 1 - delta_2(w')) / 2`.
pub(crate) fn symmetrize(rule: &mut TreatmentRule) {
    let space = rule.sample_space().clone();
    let orig: Vec<f64> = rule.column(1);
    for (w, counts) in space.iter().enumerate() {
        let mirror = space.flat(&space.complement(&counts));
        let d = 0.5 * (orig[w] + 1.0 - orig[mirror]);
        let row = rule.row_mut(w);
        row[0] = 1.0 - d;
        row[1] = d;
    }
}

/// Fictitious play over symmetric rules against mirror-paired nature actions.
pub fn solve_symmetric(config: &SolveConfig) -> Result<SolveReport> {
    let spec = &config.spec;
    if !spec.is_two_arm() {
        return Err(Error::InvalidConfig("the symmetric solver needs a two-arm problem".into()));
    }
    if !config.grid.is_mirror_closed() {
        return Err(Error::InvalidConfig(
            "grid constraint is not closed under mu -> (1,1) - mu; use the general solver".into(),
        ));
    }
    let sizes = spec.sample_sizes();
    let asym = check_symmetry(&config.init_rule, sizes[0], sizes[1]);
    if asym > 1e-10 {
        return Err(Error::InvalidConfig(format!("initial rule is not symmetric (deviation {asym:.3e})")));
    }
    run(config, Symmetry::Mirror)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn es_two_by_two() {
        let r = es_rule(2, 2, EsVariant::Symmetric).unwrap();
        assert_eq!(r.delta2(1, 1), 0.5);
        assert_eq!(r.delta2(0, 1), 1.0);
        assert_eq!(r.delta2(2, 2), 1.0);
        assert_eq!(r.delta2(0, 0), 0.0);
        assert_eq!(check_symmetry(&r, 2, 2), 0.0);
    }

    #[test]
    fn ties_to_two() {
        let r = es_rule(3, 3, EsVariant::TiesToTwo).unwrap();
        for a in 0..=3 {
            assert_eq!(r.delta2(a, a), 1.0);
        }
        assert_eq!(r.delta2(2, 1), 0.0);
    }

    #[test]
    fn so_two_by_two() {
        let r = so_rule(2, 2).unwrap();
        for b in 0..=2 {
            assert_eq!(r.delta2(0, b), 1.0);
            assert_eq!(r.delta2(2, b), 0.0);
        }
        assert_eq!(r.delta2(1, 0), 1.0);
        assert_eq!(r.delta2(1, 2), 0.0);
        assert_eq!(r.delta2(1, 1), 0.5);
        assert_eq!(check_symmetry(&r, 2, 2), 0.0);
    }

    #[test]
    fn unbalanced_es_is_symmetric() {
        for (n1, n2) in [(0, 4), (3, 7), (10, 20), (4, 6)] {
            let r = es_rule(n1, n2, EsVariant::Symmetric).unwrap();
            assert_eq!(check_symmetry(&r, n1, n2), 0.0, "{n1},{n2}");
            let r = so_rule(n1, n2).unwrap();
            assert_eq!(check_symmetry(&r, n1, n2), 0.0, "{n1},{n2}");
        }
    }

    #[test]
    fn reflected_is_symmetric_with_arms_exchanged() {
        let r = es_rule(4, 6, EsVariant::Reflected).unwrap();
        let s = es_rule(6, 4, EsVariant::Symmetric).unwrap();
        for a in 0..=4 {
            for b in 0..=6 {
                assert_eq!(r.delta2(a, b), 1.0 - s.delta2(b, a), "{a},{b}");
            }
        }
        assert_eq!(check_symmetry(&r, 4, 6), 0.0);
    }

    #[test]
    fn degenerate_sizes() {
        assert!(es_rule(0, 0, EsVariant::Symmetric).is_err());
        assert!(so_rule(0, 0).is_err());
    }

    #[test]
    fn always_two_is_maximally_asymmetric() {
        let r = TreatmentRule::from_fn(2, vec![2, 3], |_| vec![0.0, 1.0]).unwrap();
        assert_eq!(check_symmetry(&r, 2, 3), 1.0);
    }

    #[test]
    fn symmetrize_projects() {
        let mut r = TreatmentRule::from_fn(2, vec![2, 2], |c| {
            let d = (c[0] * 3 + c[1]) as f64 / 8.0;
            vec![1.0 - d, d]
        })
        .unwrap();
        symmetrize(&mut r);
        assert!(check_symmetry(&r, 2, 2) < 1e-15);
        assert_eq!(r.delta2(1, 1), 0.5);
    }
}
