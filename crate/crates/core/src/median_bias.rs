//! Rectilinear, Tukey and orthant median biases.
//!
//! Sample-based biases take a list of estimates and the target point. The
//! orthant bias of a general (possibly atomic) law is computed on its sign
//! measure: edge mass is dispersed into compatible orthants so as to
//! maximise the smallest orthant probability, which is a max-min
//! transportation problem solved by bisection over max-flow feasibility.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;
use crate::sign_measure::{empirical_sign_measure, is_mch, SignMeasure};
use crate::transport::Transport;

/// Default absolute precision of [`omb_general`] on the minimum orthant mass.
pub const DEFAULT_OMB_TOL: f64 = 1e-10;

/// Default number of random directions for the sampled Tukey bias.
pub const DEFAULT_DIRECTIONS: usize = 10_000;

const FEASIBILITY_SLACK: f64 = 1e-12;
const PAIRWISE_LIMIT: usize = 200;

/// How the Tukey bias minimises over directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TukeyMethod {
    /// Angular sweep over all critical directions; `d <= 2` only.
    Exact,
    /// Minimum over random directions plus the coordinate axes (and all
    /// pairwise difference directions for small samples). The result is a
    /// lower bound on the true bias.
    Sampled { directions: usize, seed: u64 },
}

impl TukeyMethod {
    pub fn is_exact(&self) -> bool {
        matches!(self, TukeyMethod::Exact)
    }
}

/// All three biases for one sample, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub r_bias: f64,
    pub t_bias: f64,
    pub o_bias: f64,
    pub tukey_method: TukeyMethod,
    /// Whether the sample's sign measure had no edge mass.
    pub sign_measure_mch: bool,
}

impl BiasReport {
    pub fn method_note(&self, which: &str) -> &'static str {
        match which {
            "r" => "exact",
            "t" if self.tukey_method.is_exact() => "exact-sweep",
            "t" => "sampled-lower-bound",
            "o" if self.sign_measure_mch => "exact-mch",
            _ => "exact-dispersal",
        }
    }
}

fn centered(points: &[Vec<f64>], center: &[f64]) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Err(invalid("sample is empty"));
    }
    if center.is_empty() {
        return Err(invalid("center must have dimension >= 1"));
    }
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.len() != center.len() {
                return Err(invalid(format!(
                    "point {i} has dimension {}, expected {}",
                    p.len(),
                    center.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("point {i} has a non-finite coordinate")));
            }
            Ok(p.iter().zip(center).map(|(a, b)| a - b).collect())
        })
        .collect()
}

/// Rectilinear median bias: `(1/2 - min_{j, ±} P(±(x_j - c_j) >= 0))_+`.
pub fn r_med_bias(points: &[Vec<f64>], center: &[f64]) -> Result<f64> {
    let xs = centered(points, center)?;
    let n = xs.len() as f64;
    let mut min_count = usize::MAX;
    for j in 0..center.len() {
        let nonneg = xs.iter().filter(|x| x[j] >= 0.0).count();
        let nonpos = xs.iter().filter(|x| x[j] <= 0.0).count();
        min_count = min_count.min(nonneg).min(nonpos);
    }
    Ok((0.5 - min_count as f64 / n).max(0.0))
}

/// Tukey median bias: `(1/2 - min_λ P(λᵀ(x - c) >= 0))_+` over nonzero `λ`.
pub fn t_med_bias(points: &[Vec<f64>], center: &[f64], method: TukeyMethod) -> Result<f64> {
    let xs = centered(points, center)?;
    let n = xs.len();
    let d = center.len();
    let min_count = match method {
        TukeyMethod::Exact => match d {
            1 => {
                let pos = xs.iter().filter(|x| x[0] >= 0.0).count();
                let neg = xs.iter().filter(|x| x[0] <= 0.0).count();
                pos.min(neg)
            }
            2 => min_halfplane_count(&xs),
            _ => {
                return Err(Error::Unsupported(format!(
                    "exact Tukey bias needs d <= 2, got d = {d}"
                )))
            }
        },
        TukeyMethod::Sampled { directions, seed } => sampled_min_count(&xs, directions, seed),
    };
    Ok((0.5 - min_count as f64 / n as f64).max(0.0))
}

/// Smallest number of points in a closed half-plane through the origin.
///
/// Point `x` lies in `{y: λᵀy >= 0}` for `λ` in a closed half-circle of
/// directions. Sorting the endpoints of these arcs and sweeping once around
/// the circle visits every open arc between consecutive critical directions;
/// the minimum is always attained on such an open arc.
fn min_halfplane_count(xs: &[Vec<f64>]) -> usize {
    let origin = xs.iter().filter(|x| x[0] == 0.0 && x[1] == 0.0).count();
    // (direction, point index, entering?)
    let mut events: Vec<([f64; 2], usize, bool)> = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        if x[0] == 0.0 && x[1] == 0.0 {
            continue;
        }
        // λ enters the arc at x rotated by -90°, leaves at +90°. Adding 0.0
        // turns -0.0 into +0.0 so that atan2 never splits the direction
        // (-1, 0) between -π and π.
        events.push(([x[1] + 0.0, -x[0] + 0.0], i, true));
        events.push(([-x[1] + 0.0, x[0] + 0.0], i, false));
    }
    if events.is_empty() {
        return origin;
    }
    let angle = |v: &[f64; 2]| v[1].atan2(v[0]);
    events.sort_by(|a, b| angle(&a.0).total_cmp(&angle(&b.0)));

    let same_direction = |a: &[f64; 2], b: &[f64; 2]| {
        a[0] * b[1] - a[1] * b[0] == 0.0 && a[0] * b[0] + a[1] * b[1] > 0.0
    };

    // Points whose arc wraps past the end of the sorted order are inside the
    // arc that precedes the first event.
    let mut enter_pos = vec![usize::MAX; xs.len()];
    let mut leave_pos = vec![usize::MAX; xs.len()];
    for (pos, (_, i, entering)) in events.iter().enumerate() {
        if *entering {
            enter_pos[*i] = pos;
        } else {
            leave_pos[*i] = pos;
        }
    }
    let initial = enter_pos
        .iter()
        .zip(&leave_pos)
        .filter(|(e, l)| **e != usize::MAX && l < e)
        .count() as i64;

    let mut count = initial;
    let mut best = i64::MAX;
    let mut k = 0;
    while k < events.len() {
        let head = events[k].0;
        while k < events.len() && same_direction(&head, &events[k].0) {
            count += if events[k].2 { 1 } else { -1 };
            k += 1;
        }
        best = best.min(count);
    }
    debug_assert_eq!(count, initial);
    debug_assert!(best >= 0);
    best as usize + origin
}

fn sampled_min_count(xs: &[Vec<f64>], directions: usize, seed: u64) -> usize {
    let d = xs[0].len();
    let count = |lambda: &[f64]| {
        xs.iter()
            .filter(|x| x.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>() >= 0.0)
            .count()
    };
    let mut best = usize::MAX;
    for j in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[j] = sign;
            best = best.min(count(&e));
        }
    }
    let mut rng = stream_rng(seed, 0);
    for _ in 0..directions {
        let v: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        best = best.min(count(&v));
    }
    if xs.len() <= PAIRWISE_LIMIT {
        for a in xs {
            for b in xs {
                let v: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
                if v.iter().any(|c| *c != 0.0) {
                    best = best.min(count(&v));
                }
            }
        }
    }
    best
}

/// Orthant median bias of a sign measure with no edge mass.
pub fn o_med_bias_mch(m: &SignMeasure) -> Result<f64> {
    if !is_mch(m, 0.0) {
        return Err(Error::Precondition(format!(
            "measure carries edge mass {}; use omb_general",
            m.edge_mass()
        )));
    }
    Ok(naive_orthant_bias(&m.orthant_masses()))
}

fn naive_orthant_bias(orthant_masses: &[f64]) -> f64 {
    let k = orthant_masses.len() as f64;
    let min = orthant_masses.iter().cloned().fold(f64::INFINITY, f64::min);
    (k / 2.0 * (1.0 / k - min)).max(0.0)
}

/// General orthant median bias of an arbitrary sign measure.
///
/// Computes `t* = max min_γ (m(γ) + inflow(γ))` over all ways of dispersing
/// each edge atom's mass into the orthants it precedes, to absolute precision
/// `tol` (the reported `t*` is always feasible, so the bias is never
/// understated by more than rounding). Returns `2^{d-1} (2^{-d} - t*)_+`.
///
/// # Panics
/// If `tol` is not positive.
pub fn omb_general(m: &SignMeasure, tol: f64) -> f64 {
    assert!(tol > 0.0, "omb_general: tol must be positive");
    let d = m.dim();
    let orth = m.orthant_masses();
    let k = orth.len();
    let target = 1.0 / k as f64;
    let floor = orth.iter().cloned().fold(f64::INFINITY, f64::min);

    let (supplies, neighbors): (Vec<f64>, Vec<Vec<usize>>) = m
        .atoms()
        .filter(|(s, _)| !s.is_orthant())
        .map(|(s, mass)| (mass, s.compatible_orthants()))
        .unzip();
    if supplies.is_empty() {
        return naive_orthant_bias(&orth);
    }
    let transport = Transport {
        supplies,
        neighbors,
        demand_count: k,
    };

    let feasible = |t: f64| -> bool {
        let demands: Vec<f64> = orth.iter().map(|&m| (t - m).max(0.0)).collect();
        let need: f64 = demands.iter().sum();
        let ok = transport.max_shipment(&demands) >= need - FEASIBILITY_SLACK;
        if cfg!(debug_assertions) && d <= 3 {
            let margin = transport.hall_margin(&demands);
            debug_assert!(
                !(margin < -1e-9 && ok) && !(margin > 1e-9 && !ok),
                "max-flow and Hall disagree at t={t}: margin {margin}, ok {ok}"
            );
        }
        ok
    };

    if feasible(target) {
        return 0.0;
    }
    let (mut lo, mut hi) = (floor, target);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (k as f64 / 2.0 * (target - lo)).clamp(0.0, 0.5)
}

/// Univariate orthant median bias `(1/2 - min{p+q, r+q})_+` from
/// `p = P(x < c)`, `q = P(x = c)`, `r = P(x > c)`.
pub fn omb_1d_closed_form(p: f64, q: f64, r: f64) -> Result<f64> {
    if [p, q, r].iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("masses must be finite and non-negative"));
    }
    if (p + q + r - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("masses sum to {}, expected 1", p + q + r)));
    }
    Ok((0.5 - (p + q).min(r + q)).max(0.0))
}

/// `max` over closed orthants `A` of `|a(A) - b(A)|`.
pub fn orthant_sup_distance(a: &SignMeasure, b: &SignMeasure) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(invalid("dimension mismatch"));
    }
    Ok(a.closed_orthant_masses()
        .iter()
        .zip(b.closed_orthant_masses())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// All three biases of `points` about `center`. The orthant bias goes through
/// the empirical sign measure so exact zeros are dispersed, never ignored.
pub fn bias_report(
    points: &[Vec<f64>],
    center: &[f64],
    tukey: TukeyMethod,
    zero_tol: f64,
) -> Result<BiasReport> {
    let r_bias = r_med_bias(points, center)?;
    let t_bias = t_med_bias(points, center, tukey)?;
    let m = empirical_sign_measure(points, center, zero_tol)?;
    let sign_measure_mch = is_mch(&m, 0.0);
    let o_bias = omb_general(&m, DEFAULT_OMB_TOL);
    Ok(BiasReport {
        r_bias,
        t_bias,
        o_bias,
        tukey_method: tukey,
        sign_measure_mch,
    })
}
