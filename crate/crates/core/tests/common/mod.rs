//! Strategies shared by the property tests.

#![allow(dead_code)]

use proptest::prelude::*;
use rect_hull::sign_measure::{all_sign_vectors, SignMeasure, SignVector};

/// Normalises weights (some forced to zero) into a measure on `support`.
fn measure_on(d: usize, support: Vec<SignVector>, raw: Vec<(bool, f64)>) -> Option<SignMeasure> {
    let weights: Vec<f64> = raw
        .iter()
        .map(|&(keep, w)| if keep { w } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    SignMeasure::new(
        d,
        support
            .into_iter()
            .zip(weights.into_iter().map(|w| w / total)),
    )
    .ok()
}

fn weights(len: usize) -> impl Strategy<Value = Vec<(bool, f64)>> {
    prop::collection::vec((prop::bool::weighted(0.7), 0.01f64..1.0), len)
}

/// Any sign measure with `1 <= d <= max_d`.
pub fn any_measure(max_d: usize) -> impl Strategy<Value = SignMeasure> {
    (1..=max_d)
        .prop_flat_map(|d| (Just(d), weights(3usize.pow(d as u32))))
        .prop_filter_map("empty support", |(d, w)| {
            measure_on(d, all_sign_vectors(d), w)
        })
}

/// Sign measure supported on orthant labels only.
pub fn mch_measure(max_d: usize) -> impl Strategy<Value = SignMeasure> {
    (1..=max_d)
        .prop_flat_map(|d| (Just(d), weights(1 << d)))
        .prop_filter_map("empty support", |(d, w)| {
            measure_on(
                d,
                (0..1 << d).map(|i| SignVector::orthant(d, i)).collect(),
                w,
            )
        })
}

/// Sign measure with positive edge mass.
pub fn edge_measure(max_d: usize) -> impl Strategy<Value = SignMeasure> {
    any_measure(max_d).prop_filter("needs edge mass", |m| m.edge_mass() > 0.0)
}

/// Sign measure of fixed dimension with positive edge mass.
pub fn edge_measure_in(d: usize) -> impl Strategy<Value = SignMeasure> {
    weights(3usize.pow(d as u32))
        .prop_filter_map("empty support", move |w| {
            measure_on(d, all_sign_vectors(d), w)
        })
        .prop_filter("needs edge mass", |m| m.edge_mass() > 0.0)
}

/// Sign vectors `t != s` with `s ⪯ t`.
pub fn strict_successors(s: &SignVector) -> Vec<SignVector> {
    all_sign_vectors(s.dim())
        .into_iter()
        .filter(|t| {
            t != s
                && s.entries()
                    .iter()
                    .zip(t.entries())
                    .all(|(a, b)| *a == 0 || a == b)
        })
        .collect()
}
