//! The two exact miscoverage routes agree, and both respect the bounds.

mod common;

use common::{any_measure, edge_measure, edge_measure_in, mch_measure, strict_successors};
use proptest::prelude::*;
use rect_hull::bounds::{lower_bound, upper_bound};
use rect_hull::median_bias::{o_med_bias_mch, omb_general, DEFAULT_OMB_TOL};
use rect_hull::sign_measure::{apply_elementary, ElementaryOp, SignMeasure};
use rect_hull::simulate::{enumerate_miscoverage, mu_m, oracle_miscoverage};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn inclusion_exclusion_matches_enumeration(m in any_measure(3), b in 1usize..=4) {
        let a = oracle_miscoverage(&m, b).unwrap();
        let e = enumerate_miscoverage(&m, b).unwrap();
        prop_assert!((a - e).abs() <= 1e-12, "oracle {a} enumeration {e}");
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mch_miscoverage_is_sandwiched(m in mch_measure(3)) {
        let d = m.dim();
        let delta = o_med_bias_mch(&m).unwrap();
        for b in 2..=6 {
            let p = oracle_miscoverage(&m, b).unwrap();
            let l = lower_bound(b, delta, d).unwrap();
            let u = upper_bound(b, delta, d).unwrap();
            prop_assert!(l - 1e-12 <= p && p <= u + 1e-12, "B={} d={}: {} not in [{}, {}]", b, d, p, l, u);
        }
    }

    #[test]
    fn general_miscoverage_below_upper_bound(m in edge_measure(3)) {
        let d = m.dim();
        let delta = omb_general(&m, DEFAULT_OMB_TOL);
        for b in 2..=6 {
            let p = oracle_miscoverage(&m, b).unwrap();
            let u = upper_bound(b, delta, d).unwrap();
            prop_assert!(p <= u + 1e-9, "B={} d={}: {} > {}", b, d, p, u);
        }
    }

    #[test]
    fn dispersal_never_lowers_miscoverage(
        m in edge_measure_in(2),
        pick in any::<prop::sample::Index>(),
        target in any::<prop::sample::Index>(),
        frac in 0.0f64..=1.0,
    ) {
        let edges: Vec<_> = m.atoms().filter(|(s, _)| !s.is_orthant()).map(|(s, p)| (s.clone(), p)).collect();
        let (source, mass) = pick.get(&edges).clone();
        let succ = strict_successors(&source);
        let op = ElementaryOp::new(source, target.get(&succ).clone(), frac * mass).unwrap();
        let next = apply_elementary(&m, &op).unwrap();
        for b in 2..=5 {
            let before = oracle_miscoverage(&m, b).unwrap();
            let after = oracle_miscoverage(&next, b).unwrap();
            prop_assert!(before <= after + 1e-12, "B={}: {} > {}", b, before, after);
        }
    }
}

#[test]
fn lower_bound_below_fixture_with_matching_bias() {
    // μ_M has orthant bias 0.1
    let m = mu_m();
    assert!((o_med_bias_mch(&m).unwrap() - 0.1).abs() < 1e-15);
    let l = lower_bound(3, 0.1, 2).unwrap();
    let p = oracle_miscoverage(&m, 3).unwrap();
    assert!(l <= p, "{l} > {p}");
    assert!(p <= upper_bound(3, 0.1, 2).unwrap());
}

#[test]
fn univariate_oracle_is_two_tails() {
    for (lo, zero, hi) in [(0.2, 0.4, 0.4), (0.5, 0.0, 0.5), (0.1, 0.1, 0.8)] {
        let m = SignMeasure::from_pairs(1, &[(&[-1], lo), (&[0], zero), (&[1], hi)]).unwrap();
        for b in 1..8 {
            let want = f64::powi(lo, b as i32) + f64::powi(hi, b as i32);
            assert!((oracle_miscoverage(&m, b).unwrap() - want).abs() < 1e-15);
        }
    }
}
