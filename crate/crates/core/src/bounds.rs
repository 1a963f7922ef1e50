//! Closed-form miscoverage bounds for the rectangular hull of `B` i.i.d.
//! estimators with orthant median bias at most `delta`, and the batch-count
//! rules built on them.

use crate::error::{invalid, Error, Result};

/// Largest dimension accepted by the bound formulas.
pub const MAX_BOUND_DIM: usize = 30;

/// Parameters shared by the bound formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsQuery {
    pub batches: usize,
    pub dim: usize,
    pub delta: f64,
}

impl BoundsQuery {
    pub fn new(batches: usize, dim: usize, delta: f64) -> Result<Self> {
        if batches == 0 {
            return Err(invalid("number of batches must be >= 1"));
        }
        if dim == 0 || dim > MAX_BOUND_DIM {
            return Err(Error::Unsupported(format!(
                "bounds support 1 <= d <= {MAX_BOUND_DIM}, got {dim}"
            )));
        }
        if !(0.0..=0.5).contains(&delta) {
            return Err(invalid(format!("delta {delta} must lie in [0, 1/2]")));
        }
        Ok(Self {
            batches,
            dim,
            delta,
        })
    }

    pub fn lower(&self) -> f64 {
        alternating_sum(self, Side::Lower)
    }

    pub fn upper(&self) -> f64 {
        alternating_sum(self, Side::Upper)
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Lower,
    Upper,
}

/// `N (1/N)^B` with `N = 2^j`: the smallest value of `sum x_i^B` on the simplex.
fn spread_min(j: usize, b: usize) -> f64 {
    (-((j * (b - 1)) as f64)).exp2()
}

/// `(N-1) beta^B + (1-(N-1) beta)^B` with `N = 2^j`, `beta = (1 - 2 delta) / 2^j`.
fn spread_max(j: usize, b: usize, delta: f64) -> f64 {
    let n = (j as f64).exp2();
    let inv = 1.0 / n;
    let step = delta / (n / 2.0);
    (n - 1.0) * (inv - step).powi(b as i32) + (inv + (n - 1.0) * step).powi(b as i32)
}

/// Inclusion-exclusion over coordinate subsets of size `j`: the lower bound
/// takes the minimal spread on odd layers and the maximal on even layers,
/// the upper bound the reverse.
fn alternating_sum(q: &BoundsQuery, side: Side) -> f64 {
    let mut total = 0.0;
    for j in 1..=q.dim {
        let c = binomial(q.dim, j) as f64;
        let odd = j % 2 == 1;
        let term = match (side, odd) {
            (Side::Lower, true) => spread_min(j, q.batches),
            (Side::Lower, false) => -spread_max(j, q.batches, q.delta),
            (Side::Upper, true) => spread_max(j, q.batches, q.delta),
            (Side::Upper, false) => -spread_min(j, q.batches),
        };
        total += c * term;
    }
    total
}

/// Lower miscoverage bound `L(B, delta; d)`.
pub fn lower_bound(batches: usize, delta: f64, dim: usize) -> Result<f64> {
    Ok(BoundsQuery::new(batches, dim, delta)?.lower())
}

/// Upper miscoverage bound `U(B, delta; d)`.
pub fn upper_bound(batches: usize, delta: f64, dim: usize) -> Result<f64> {
    Ok(BoundsQuery::new(batches, dim, delta)?.upper())
}

/// `1 - (1 - 2^{1-B})^d`, the common value of both bounds at zero bias.
pub fn zero_bias_miscoverage(batches: usize, dim: usize) -> f64 {
    let tail = (1.0 - batches as f64).exp2();
    1.0 - (1.0 - tail).powi(dim as i32)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha {alpha} must lie in (0, 1)")))
    }
}

/// Smallest `B` with `U(B, 0; d) <= alpha`, computed by the ceiling formula
/// `ceil(1 - log2(1 - (1 - alpha)^{1/d}))` and verified against the bound.
pub fn batch_count(alpha: f64, dim: usize) -> Result<usize> {
    check_alpha(alpha)?;
    if dim == 0 || dim > MAX_BOUND_DIM {
        return Err(Error::Unsupported(format!(
            "bounds support 1 <= d <= {MAX_BOUND_DIM}, got {dim}"
        )));
    }
    // (1 - alpha)^{1/d} via exp/ln_1p keeps precision for small alpha.
    let root_gap = -((-alpha).ln_1p() / dim as f64).exp_m1();
    let b = (1.0 - root_gap.log2()).ceil();
    if !(b.is_finite() && b >= 1.0) {
        return Err(Error::Inconsistent(format!("batch count formula gave {b}")));
    }
    let b = b as usize;
    let at = upper_bound(b, 0.0, dim)?;
    let below = if b > 1 {
        upper_bound(b - 1, 0.0, dim)?
    } else {
        f64::INFINITY
    };
    if at > alpha || below <= alpha {
        return Err(Error::Inconsistent(format!(
            "batch count {b} for alpha={alpha}, d={dim}: U(B)={at}, U(B-1)={below}"
        )));
    }
    Ok(b)
}

/// Outcome of the randomized batch-count draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchChoice {
    /// `B_{alpha,d}`.
    pub batch_count: usize,
    /// Probability of using one batch fewer.
    pub tau: f64,
    /// The number of batches actually used.
    pub b_star: usize,
}

/// Randomizes between `B_{alpha,d} - 1` and `B_{alpha,d}` batches so that the
/// expected zero-bias miscoverage equals `alpha` exactly.
///
/// When `B_{alpha,d} = 1` the mixture is degenerate: `tau = 0`, `b_star = 1`.
pub fn randomized_batches(alpha: f64, dim: usize, uniform_draw: f64) -> Result<BatchChoice> {
    let b = batch_count(alpha, dim)?;
    if b == 1 {
        return Ok(BatchChoice {
            batch_count: 1,
            tau: 0.0,
            b_star: 1,
        });
    }
    let at = upper_bound(b, 0.0, dim)?;
    let below = upper_bound(b - 1, 0.0, dim)?;
    let tau = (alpha - at) / (below - at);
    let b_star = if uniform_draw <= tau { b - 1 } else { b };
    Ok(BatchChoice {
        batch_count: b,
        tau,
        b_star,
    })
}

/// Jensen-type bracket for `sum x_i^B` over `x` in the simplex with `x_i >= beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSpread {
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub holds: bool,
}

pub fn group_spread_bounds(x: &[f64], beta: f64, batches: usize) -> Result<GroupSpread> {
    const TOL: f64 = 1e-12;
    if x.is_empty() || batches == 0 {
        return Err(invalid("need a nonempty vector and B >= 1"));
    }
    let n = x.len() as f64;
    if !(0.0..=1.0 / n + TOL).contains(&beta) {
        return Err(invalid(format!("beta {beta} must lie in [0, 1/N]")));
    }
    if let Some(v) = x.iter().find(|&&v| v < beta - TOL) {
        return Err(invalid(format!("entry {v} is below beta {beta}")));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > TOL {
        return Err(invalid(format!("entries sum to {sum}, expected 1")));
    }
    let b = batches as i32;
    let lower = n * (1.0 / n).powi(b);
    let upper = (n - 1.0) * beta.powi(b) + (1.0 - (n - 1.0) * beta).powi(b);
    let value: f64 = x.iter().map(|v| v.powi(b)).sum();
    let slack = 1e-12 * upper.abs().max(1.0);
    let holds = value >= lower - slack && value <= upper + slack;
    Ok(GroupSpread {
        lower,
        upper,
        value,
        holds,
    })
}
