mod common;

use std::collections::BTreeMap;

use common::{any_measure, strict_successors};
use proptest::prelude::*;
use rand::Rng;
use rect_hull::rng::stream_rng;
use rect_hull::sign_measure::{
    apply_elementary, couple_sample, mch_order_conjectured, ElementaryOp, SignMeasure, SignVector,
};
use rect_hull::simulate::{Distribution, DistributionSpec};

fn sv(v: &[i8]) -> SignVector {
    SignVector::new(v.to_vec()).unwrap()
}

#[test]
fn coupling_reproduces_the_dispersed_law() {
    let mu = SignMeasure::from_pairs(
        2,
        &[
            (&[0, 1], 0.3),
            (&[0, 0], 0.2),
            (&[1, 1], 0.1),
            (&[-1, 1], 0.25),
            (&[1, -1], 0.15),
        ],
    )
    .unwrap();
    let op = ElementaryOp::new(sv(&[0, 1]), sv(&[-1, 1]), 0.18).unwrap();
    let nu = apply_elementary(&mu, &op).unwrap();

    let spec = DistributionSpec::new(Distribution::DiscreteSign(mu.clone())).unwrap();
    let mut rng = stream_rng(2024, 0);
    let n = 100_000;
    let mut counts: BTreeMap<SignVector, usize> = BTreeMap::new();
    for _ in 0..n {
        let x = spec.draw(&mut rng);
        let s = SignVector::new(x.iter().map(|&v| v as i8).collect()).unwrap();
        let p = couple_sample(&s, &mu, &op, rng.random());
        *counts.entry(p).or_default() += 1;
    }
    for (s, want) in nu.atoms() {
        let got = counts.get(s).copied().unwrap_or(0) as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() <= 3.0 * se, "{s}: {got} vs {want}");
    }
    assert!(counts.keys().all(|s| nu.mass(s) > 0.0));
}

/// Walks a random chain of elementary operations and reports whether the
/// pairwise dominance condition held between the start and every step.
fn run_chain(m: &SignMeasure, seed: u64, steps: usize) -> (SignMeasure, Vec<SignMeasure>) {
    let mut rng = stream_rng(seed, 0);
    let mut cur = m.clone();
    let mut path = Vec::new();
    for _ in 0..steps {
        let edges: Vec<(SignVector, f64)> = cur
            .atoms()
            .filter(|(s, _)| !s.is_orthant())
            .map(|(s, p)| (s.clone(), p))
            .collect();
        if edges.is_empty() {
            break;
        }
        let (source, mass) = edges[rng.random_range(0..edges.len())].clone();
        let succ = strict_successors(&source);
        let target = succ[rng.random_range(0..succ.len())].clone();
        let amount = if rng.random::<f64>() < 0.3 {
            mass
        } else {
            rng.random::<f64>() * mass
        };
        let op = ElementaryOp::new(source, target, amount).unwrap();
        cur = apply_elementary(&cur, &op).unwrap();
        let total: f64 = cur.atoms().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert!(cur.atoms().all(|(_, p)| p >= 0.0));
        path.push(cur.clone());
    }
    (cur, path)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The dominance condition is only conjectured to follow from chain
    /// reachability. Violations are printed, never asserted.
    #[test]
    fn chains_against_conjectured_order(m in any_measure(3), seed in any::<u64>(), steps in 1usize..8) {
        let (_, path) = run_chain(&m, seed, steps);
        for (k, nu) in path.iter().enumerate() {
            if !mch_order_conjectured(&m, nu, 1e-12).unwrap() {
                println!("conjectured order fails after {} step(s): start {:?}, reached {:?}", k + 1, m, nu);
            }
        }
    }
}

#[test]
fn known_chain_counterexample_to_conjectured_order() {
    // Heavy zero atom pushed entirely to one side.
    let mu = SignMeasure::from_pairs(1, &[(&[0], 0.9), (&[-1], 0.05), (&[1], 0.05)]).unwrap();
    let nu = apply_elementary(&mu, &ElementaryOp::new(sv(&[0]), sv(&[-1]), 0.9).unwrap()).unwrap();
    assert!((nu.mass(&sv(&[-1])) - 0.95).abs() < 1e-15);
    assert!(!mch_order_conjectured(&mu, &nu, 1e-12).unwrap());
}

#[test]
fn worked_chain_satisfies_conjectured_order() {
    let mu = SignMeasure::from_pairs(1, &[(&[0], 0.4), (&[-1], 0.4), (&[1], 0.2)]).unwrap();
    let lambda =
        apply_elementary(&mu, &ElementaryOp::new(sv(&[0]), sv(&[-1]), 0.2).unwrap()).unwrap();
    let nu = apply_elementary(
        &lambda,
        &ElementaryOp::new(sv(&[0]), sv(&[1]), 0.2).unwrap(),
    )
    .unwrap();
    assert!((nu.mass(&sv(&[-1])) - 0.6).abs() < 1e-15);
    assert!((nu.mass(&sv(&[1])) - 0.4).abs() < 1e-15);
    assert!(mch_order_conjectured(&mu, &nu, 1e-12).unwrap());
}
