mod common;

use common::{any_measure, mch_measure};
use proptest::prelude::*;
use rect_hull::median_bias::{
    o_med_bias_mch, omb_1d_closed_form, omb_general, orthant_sup_distance, r_med_bias, t_med_bias,
    TukeyMethod, DEFAULT_OMB_TOL,
};
use rect_hull::sign_measure::{empirical_sign_measure, SignMeasure};
use rect_hull::simulate::{mu_m, mu_nm, sample, Distribution, DistributionSpec, Gaussian};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dispersal_bias_agrees_on_mch(m in mch_measure(4)) {
        let a = omb_general(&m, DEFAULT_OMB_TOL);
        let b = o_med_bias_mch(&m).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn dispersal_bias_in_range(m in any_measure(3)) {
        let v = omb_general(&m, DEFAULT_OMB_TOL);
        prop_assert!((0.0..=0.5).contains(&v));
    }

    #[test]
    fn univariate_dispersal_matches_closed_form(w in prop::array::uniform3(0.0f64..1.0)) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 0.0);
        let (p, q) = (w[0] / total, w[1] / total);
        let r = 1.0 - p - q;
        let m = SignMeasure::from_pairs(1, &[(&[-1], p), (&[0], q), (&[1], r)]).unwrap();
        let a = omb_general(&m, DEFAULT_OMB_TOL);
        let b = omb_1d_closed_form(p, q, r).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn bias_is_lipschitz_in_orthant_distance(a in any_measure(3), b in any_measure(3)) {
        prop_assume!(a.dim() == b.dim());
        let gap = (omb_general(&a, DEFAULT_OMB_TOL) - omb_general(&b, DEFAULT_OMB_TOL)).abs();
        let dist = orthant_sup_distance(&a, &b).unwrap();
        prop_assert!(gap <= (a.dim() as f64).exp2() * dist + 1e-9, "gap {} dist {}", gap, dist);
    }

    #[test]
    fn rectilinear_never_exceeds_tukey(
        pts in prop::collection::vec(prop::array::uniform2(-3i32..=3), 1..40),
    ) {
        let pts: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] as f64, p[1] as f64]).collect();
        let r = r_med_bias(&pts, &[0.0, 0.0]).unwrap();
        let t = t_med_bias(&pts, &[0.0, 0.0], TukeyMethod::Exact).unwrap();
        prop_assert!(r <= t + 1e-9, "r {} t {}", r, t);
        let ts = t_med_bias(&pts, &[0.0, 0.0], TukeyMethod::Sampled { directions: 200, seed: 1 }).unwrap();
        prop_assert!(r <= ts + 1e-9 && ts <= t + 1e-12);
    }
}

#[test]
fn fixture_pair_respects_distance_bound() {
    let (a, b) = (
        omb_general(&mu_m(), DEFAULT_OMB_TOL),
        omb_general(&mu_nm(), DEFAULT_OMB_TOL),
    );
    let v = orthant_sup_distance(&mu_m(), &mu_nm()).unwrap();
    assert!((a - 0.1).abs() < 1e-9);
    assert!((v - 0.2).abs() < 1e-12);
    assert!((a - b).abs() <= 4.0 * v);
}

#[test]
fn empirical_bias_converges_to_limit_within_distance_bound() {
    // sqrt(n) times the mean error of n standard normals is again standard normal
    let limit = SignMeasure::from_pairs(
        2,
        &[
            (&[1, 1], 0.25),
            (&[-1, 1], 0.25),
            (&[-1, -1], 0.25),
            (&[1, -1], 0.25),
        ],
    )
    .unwrap();
    let spec = DistributionSpec::standard_gaussian(2).unwrap();
    for (k, n) in [100usize, 1000, 10_000].into_iter().enumerate() {
        let pts = sample(&spec, n, 40 + k as u64).unwrap();
        let emp = empirical_sign_measure(&pts, &[0.0, 0.0], 0.0).unwrap();
        let gap = (omb_general(&emp, DEFAULT_OMB_TOL) - omb_general(&limit, DEFAULT_OMB_TOL)).abs();
        assert!(gap <= 4.0 * orthant_sup_distance(&emp, &limit).unwrap() + 1e-12);
    }
}

const N: usize = 100_000;

#[test]
fn sign_symmetric_law_has_no_orthant_bias() {
    let pts = sample(&DistributionSpec::standard_gaussian(2).unwrap(), N, 11).unwrap();
    let emp = empirical_sign_measure(&pts, &[0.0, 0.0], 0.0).unwrap();
    let o = omb_general(&emp, DEFAULT_OMB_TOL);
    let se = 2.0 * (0.25 * 0.75 / N as f64).sqrt();
    assert!(o <= 3.0 * se, "o_bias {o}, 3 s.e. {}", 3.0 * se);
}

#[test]
fn marginally_symmetric_law_has_no_rectilinear_bias() {
    // perfectly correlated coordinates: symmetric marginals, orthant bias 1/2
    let g = Gaussian::new(vec![0.0, 0.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let pts = sample(
        &DistributionSpec::new(Distribution::Gaussian(g)).unwrap(),
        N,
        12,
    )
    .unwrap();
    let r = r_med_bias(&pts, &[0.0, 0.0]).unwrap();
    let se = (0.25 / N as f64).sqrt();
    assert!(r <= 3.0 * se, "r_bias {r}, 3 s.e. {}", 3.0 * se);
    let emp = empirical_sign_measure(&pts, &[0.0, 0.0], 0.0).unwrap();
    assert!(omb_general(&emp, DEFAULT_OMB_TOL) > 0.49);
}

#[test]
fn centrally_symmetric_law_has_no_tukey_bias() {
    let points = vec![
        vec![1.0, 2.0],
        vec![-1.0, -2.0],
        vec![3.0, -0.5],
        vec![-3.0, 0.5],
    ];
    let spec = DistributionSpec::new(Distribution::Mixture {
        points,
        radius: 0.5,
    })
    .unwrap();
    let pts = sample(&spec, N, 13).unwrap();
    let t = t_med_bias(&pts, &[0.0, 0.0], TukeyMethod::Exact).unwrap();
    let se = (0.25 / N as f64).sqrt();
    assert!(t <= 3.0 * se, "t_bias {t}, 3 s.e. {}", 3.0 * se);
}

#[test]
fn rectilinear_bias_below_orthant_bias_for_continuous_laws() {
    let g = Gaussian::new(vec![0.1, -0.05], vec![vec![1.0, 0.6], vec![0.6, 2.0]]).unwrap();
    let spec = DistributionSpec::new(Distribution::Gaussian(g)).unwrap();
    for (k, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        let pts = sample(&spec, n, 20 + k as u64).unwrap();
        let r = r_med_bias(&pts, &[0.0, 0.0]).unwrap();
        let emp = empirical_sign_measure(&pts, &[0.0, 0.0], 0.0).unwrap();
        let o = omb_general(&emp, DEFAULT_OMB_TOL);
        let slack = 3.0 * ((4.0f64 * 2.0).ln() / n as f64).sqrt();
        assert!(r <= o + slack, "n={n}: r {r} o {o}");
    }
}
