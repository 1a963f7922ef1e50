//! Distributions, exact miscoverage oracles and Monte Carlo experiments.
//!
//! Two independent exact routes compute `P(0 not in hull of B draws)` for a
//! sign measure: inclusion-exclusion over strict-sign events, and direct
//! enumeration of all `B`-tuples of atoms. Monte Carlo routines draw each
//! replication from its own stream so output is independent of scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bounds::{lower_bound, upper_bound};
use crate::error::{invalid, Error, Result};
use crate::hulc::{
    hulc_region_with_rng, rect_hull, vertex_randomized_estimator, Dataset, Estimator,
};
use crate::median_bias::{bias_report, o_med_bias_mch, omb_general, TukeyMethod, DEFAULT_OMB_TOL};
use crate::numfmt::sig12;
use crate::rng::{stream_rng, SimRng};
use crate::sign_measure::{all_sign_vectors, empirical_sign_measure, SignMeasure, SignVector};

/// Largest dimension accepted by [`oracle_miscoverage`].
pub const ORACLE_MAX_DIM: usize = 8;

/// Largest `support^B` accepted by [`enumerate_miscoverage`].
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Smallest replication count for Monte Carlo routines.
pub const MIN_REPS: usize = 100;

/// A multivariate normal law; the covariance is factored once on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
}

impl Gaussian {
    /// Accepts any symmetric positive semidefinite covariance.
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(invalid("gaussian needs dimension >= 1"));
        }
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(invalid(format!("covariance must be {d}x{d}")));
        }
        if mean
            .iter()
            .chain(cov.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(invalid("gaussian parameters must be finite"));
        }
        let scale = cov
            .iter()
            .enumerate()
            .map(|(i, r)| r[i].abs())
            .fold(1.0, f64::max);
        let tol = 1e-12 * scale;
        for i in 0..d {
            for j in 0..i {
                if (cov[i][j] - cov[j][i]).abs() > tol {
                    return Err(invalid("covariance is not symmetric"));
                }
            }
        }
        let chol = cholesky_psd(&cov, tol)?;
        Ok(Self { mean, cov, chol })
    }

    pub fn standard(d: usize) -> Result<Self> {
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(vec![0.0; d], cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[Vec<f64>] {
        &self.cov
    }

    fn draw(&self, rng: &mut SimRng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        self.chol
            .iter()
            .zip(&self.mean)
            .map(|(row, m)| m + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

/// Lower-triangular `L` with `L L^T = a`; zero pivots (up to `tol`) give zero
/// columns, negative pivots are rejected.
fn cholesky_psd(a: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for j in 0..d {
        let pivot = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if pivot < -tol.max(1e-12) {
            return Err(invalid("covariance is not positive semidefinite"));
        }
        if pivot <= tol {
            for i in j + 1..d {
                let r = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if r.abs() > 1e-9 * a[i][i].abs().max(1.0).sqrt() {
                    return Err(invalid("covariance is not positive semidefinite"));
                }
            }
            continue;
        }
        let ljj = pivot.sqrt();
        l[j][j] = ljj;
        for i in j + 1..d {
            let r = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = r / ljj;
        }
    }
    Ok(l)
}

/// The law being sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Gaussian(Gaussian),
    /// Uniform on `{(1,1), (2,-1), (-1,2), (-1,-1)}` plus `0.1 U`, `U` uniform
    /// on the unit disk. Zero orthant bias, Tukey bias 1/4 about the origin.
    Example1,
    /// Standard bivariate normal density tilted to 3/2 on `x1 x2 >= 0` and
    /// 1/2 elsewhere. Orthant bias 1/4, Tukey bias 0 about the origin.
    Example2,
    /// Draws a sign vector from the measure and returns it as a point.
    DiscreteSign(SignMeasure),
    /// A uniformly chosen support point plus noise uniform on a ball.
    Mixture {
        points: Vec<Vec<f64>>,
        radius: f64,
    },
}

/// `r_n = n^exponent`, the scaling applied to `θ̂_n - θ0` before taking a
/// limit law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSequence {
    pub exponent: f64,
}

impl RateSequence {
    pub fn at(&self, n: usize) -> f64 {
        (n as f64).powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub kind: Distribution,
    pub rate: Option<RateSequence>,
}

impl DistributionSpec {
    pub fn new(kind: Distribution) -> Result<Self> {
        let spec = Self { kind, rate: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_rate(mut self, rate: RateSequence) -> Self {
        self.rate = Some(rate);
        self
    }

    pub fn standard_gaussian(d: usize) -> Result<Self> {
        Self::new(Distribution::Gaussian(Gaussian::standard(d)?))
    }

    fn validate(&self) -> Result<()> {
        if let Distribution::Mixture { points, radius } = &self.kind {
            let d = points
                .first()
                .ok_or_else(|| invalid("mixture needs support points"))?
                .len();
            if d == 0
                || points
                    .iter()
                    .any(|p| p.len() != d || p.iter().any(|v| !v.is_finite()))
            {
                return Err(invalid(
                    "mixture points must share a dimension >= 1 and be finite",
                ));
            }
            if !(radius.is_finite() && *radius >= 0.0) {
                return Err(invalid("mixture radius must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Distribution::Gaussian(g) => g.dim(),
            Distribution::Example1 | Distribution::Example2 => 2,
            Distribution::DiscreteSign(m) => m.dim(),
            Distribution::Mixture { points, .. } => points[0].len(),
        }
    }

    /// One draw.
    pub fn draw(&self, rng: &mut SimRng) -> Vec<f64> {
        match &self.kind {
            Distribution::Gaussian(g) => g.draw(rng),
            Distribution::Example1 => {
                let p = &EXAMPLE1_POINTS[rng.random_range(0..4)];
                let u = disk_point(rng);
                vec![p[0] + 0.1 * u[0], p[1] + 0.1 * u[1]]
            }
            Distribution::Example2 => {
                let a: f64 = rng.sample::<f64, _>(StandardNormal).abs();
                let b: f64 = rng.sample::<f64, _>(StandardNormal).abs();
                // quadrants (+,+), (-,-), (+,-), (-,+) with 3/8, 3/8, 1/8, 1/8
                let u: f64 = rng.random();
                let (sa, sb) = if u < 0.375 {
                    (1.0, 1.0)
                } else if u < 0.75 {
                    (-1.0, -1.0)
                } else if u < 0.875 {
                    (1.0, -1.0)
                } else {
                    (-1.0, 1.0)
                };
                vec![sa * a, sb * b]
            }
            Distribution::DiscreteSign(m) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last = None;
                for (s, mass) in m.atoms() {
                    acc += mass;
                    last = Some(s);
                    if u < acc {
                        break;
                    }
                }
                let s = last.expect("sign measures are nonempty");
                s.entries().iter().map(|&e| f64::from(e)).collect()
            }
            Distribution::Mixture { points, radius } => {
                let p = &points[rng.random_range(0..points.len())];
                let u = ball_point(p.len(), rng);
                p.iter().zip(u).map(|(a, b)| a + radius * b).collect()
            }
        }
    }
}

const EXAMPLE1_POINTS: [[f64; 2]; 4] = [[1.0, 1.0], [2.0, -1.0], [-1.0, 2.0], [-1.0, -1.0]];

/// Uniform on the unit disk by polar inversion.
fn disk_point(rng: &mut SimRng) -> [f64; 2] {
    let r = rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    [r * a.cos(), r * a.sin()]
}

/// Uniform on the closed unit ball of `R^d`.
fn ball_point(d: usize, rng: &mut SimRng) -> Vec<f64> {
    if d == 2 {
        return disk_point(rng).to_vec();
    }
    if d == 1 {
        return vec![2.0 * rng.random::<f64>() - 1.0];
    }
    loop {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = rng.random::<f64>().powf(1.0 / d as f64);
            return z.into_iter().map(|v| r * v / norm).collect();
        }
    }
}

/// `n` independent draws, deterministic in `seed`.
pub fn sample(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(invalid("sample size must be >= 1"));
    }
    spec.validate()?;
    let mut rng = stream_rng(seed, 0);
    Ok((0..n).map(|_| spec.draw(&mut rng)).collect())
}

/// A law with no hyperplane mass: orthant masses (+,+) 0.2, (-,+) 0.2,
/// (-,-) 0.2, (+,-) 0.4. Orthant bias 0.1.
pub fn mu_m() -> SignMeasure {
    SignMeasure::from_pairs(
        2,
        &[
            (&[1, 1], 0.2),
            (&[-1, 1], 0.2),
            (&[-1, -1], 0.2),
            (&[1, -1], 0.4),
        ],
    )
    .expect("valid fixture")
}

/// Same closed-quadrant picture as [`mu_m`] but with 0.1 on each of the
/// half-axes `(0,+)` and `(-,0)`.
pub fn mu_nm() -> SignMeasure {
    SignMeasure::from_pairs(
        2,
        &[
            (&[1, 1], 0.1),
            (&[-1, -1], 0.1),
            (&[1, -1], 0.6),
            (&[0, 1], 0.1),
            (&[-1, 0], 0.1),
        ],
    )
    .expect("valid fixture")
}

/// Kahan-Babuska-Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Exact `P(0 not in hull of B draws)` by inclusion-exclusion over the
/// events "all draws have strict sign `η_j` in coordinate `j` for `j in I`".
///
/// Patterns `c in {-1,0,1}^d` encode `(I, η)` with `I = supp(c)`; the mass of
/// each pattern is a zeta transform of the atoms over ternary digits.
pub fn oracle_miscoverage(m: &SignMeasure, batches: usize) -> Result<f64> {
    let d = m.dim();
    if d > ORACLE_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "inclusion-exclusion supports d <= {ORACLE_MAX_DIM}, got {d}"
        )));
    }
    if batches == 0 {
        return Err(invalid("B must be >= 1"));
    }
    // digit 0 = zero, 1 = +1, 2 = -1
    let size = 3usize.pow(d as u32);
    let mut f = vec![0.0; size];
    for (s, mass) in m.atoms() {
        let code = s.entries().iter().rev().fold(0, |acc, &e| {
            acc * 3
                + match e {
                    0 => 0,
                    1 => 1,
                    _ => 2,
                }
        });
        f[code] += mass;
    }
    let mut stride = 1;
    for _ in 0..d {
        for base in 0..size {
            if (base / stride) % 3 == 0 {
                f[base] += f[base + stride] + f[base + 2 * stride];
            }
        }
        stride *= 3;
    }
    let mut total = CompensatedSum::default();
    for (code, &p) in f.iter().enumerate().skip(1) {
        if p == 0.0 {
            continue;
        }
        let mut support = 0;
        let mut c = code;
        while c > 0 {
            support += usize::from(c % 3 != 0);
            c /= 3;
        }
        let term = p.powi(batches as i32);
        total.add(if support % 2 == 1 { term } else { -term });
    }
    Ok(total.value())
}

/// Exact `P(0 not in hull of B draws)` by summing over every `B`-tuple of
/// atoms with an all-agreeing strict coordinate.
pub fn enumerate_miscoverage(m: &SignMeasure, batches: usize) -> Result<f64> {
    if batches == 0 {
        return Err(invalid("B must be >= 1"));
    }
    let atoms: Vec<(Vec<i8>, f64)> = m.atoms().map(|(s, p)| (s.entries().to_vec(), p)).collect();
    let work = (atoms.len() as f64).powi(batches as i32);
    if work > ENUMERATION_BUDGET {
        return Err(Error::Unsupported(format!(
            "enumeration of {} atoms over B={batches} exceeds budget {ENUMERATION_BUDGET:e}",
            atoms.len()
        )));
    }
    let mut total = CompensatedSum::default();
    for (s, p) in &atoms {
        extend_tuples(&atoms, s.clone(), *p, batches - 1, &mut total);
    }
    Ok(total.value())
}

/// `alive[j]` is the common strict sign of coordinate `j` so far, or 0.
fn extend_tuples(
    atoms: &[(Vec<i8>, f64)],
    alive: Vec<i8>,
    weight: f64,
    left: usize,
    total: &mut CompensatedSum,
) {
    if alive.iter().all(|&a| a == 0) {
        return;
    }
    if left == 0 {
        total.add(weight);
        return;
    }
    for (s, p) in atoms {
        let next: Vec<i8> = alive
            .iter()
            .zip(s)
            .map(|(&a, &b)| if a == b { a } else { 0 })
            .collect();
        extend_tuples(atoms, next, weight * p, left - 1, total);
    }
}

/// Monte Carlo point estimate with binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl McEstimate {
    fn from_count(hits: usize, reps: usize) -> Self {
        let p = hits as f64 / reps as f64;
        Self {
            estimate: p,
            std_error: (p * (1.0 - p) / reps as f64).sqrt(),
            reps,
        }
    }

    /// Whether `target` lies within `k` standard errors plus `slack`.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.estimate - target).abs() <= k * self.std_error + slack
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(invalid(format!(
            "need at least {MIN_REPS} replications, got {reps}"
        )));
    }
    Ok(())
}

/// Fraction of replications whose hull of `B` fresh draws misses `center`.
pub fn mc_miscoverage(
    spec: &DistributionSpec,
    center: &[f64],
    batches: usize,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(reps)?;
    spec.validate()?;
    if center.len() != spec.dim() {
        return Err(invalid(format!(
            "center has dimension {}, expected {}",
            center.len(),
            spec.dim()
        )));
    }
    if batches == 0 {
        return Err(invalid("B must be >= 1"));
    }
    let misses = (0..reps)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = stream_rng(seed, r as u64);
            let draws: Vec<Vec<f64>> = (0..batches).map(|_| spec.draw(&mut rng)).collect();
            !rect_hull(&draws)
                .expect("draws share a dimension")
                .contains(center)
        })
        .count();
    Ok(McEstimate::from_count(misses, reps))
}

/// Result of a full-pipeline coverage experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// Miscoverage among replications whose region was built.
    pub miscoverage: McEstimate,
    pub mean_volume: f64,
    /// Replications lost to estimator failures.
    pub failures: usize,
}

/// Draws `n` observations per replication, builds the HulC region and checks
/// whether it contains `true_theta`.
pub fn mc_hulc_coverage(
    spec: &DistributionSpec,
    est: &dyn Estimator,
    true_theta: &[f64],
    alpha: f64,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<CoverageReport> {
    check_reps(reps)?;
    spec.validate()?;
    if true_theta.len() != est.dim() {
        return Err(invalid("true_theta must match the estimator dimension"));
    }
    let outcomes: Vec<Result<Option<(bool, f64)>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| spec.draw(&mut rng)).collect();
            let data = Dataset::from_rows(rows)?;
            match hulc_region_with_rng(&data, est, alpha, &mut rng) {
                Ok(h) => Ok(Some((!h.region.contains(true_theta), h.region.volume()))),
                Err(Error::EstimatorFailure { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut misses = 0;
    let mut built = 0;
    let mut volume = 0.0;
    for o in outcomes {
        if let Some((miss, vol)) = o? {
            built += 1;
            misses += usize::from(miss);
            volume += vol;
        }
    }
    if built == 0 {
        return Err(Error::EstimatorFailure {
            batch: 0,
            message: "every replication failed".into(),
        });
    }
    Ok(CoverageReport {
        miscoverage: McEstimate::from_count(misses, built),
        mean_volume: volume / built as f64,
        failures: reps - built,
    })
}

/// Empirical orthant bias of the vertex-randomised estimator about
/// `true_theta`: each draw builds a fresh level-`gamma` HulC region from `n`
/// observations and outputs a randomised vertex of it.
pub fn vertex_estimator_bias(
    spec: &DistributionSpec,
    est: &dyn Estimator,
    true_theta: &[f64],
    gamma: f64,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(draws)?;
    let vertices: Vec<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| spec.draw(&mut rng)).collect();
            let h = hulc_region_with_rng(&Dataset::from_rows(rows)?, est, gamma, &mut rng)?;
            Ok(vertex_randomized_estimator(
                &h.region,
                crate::hulc::DEFAULT_VERTEX_INFLATE,
                &mut rng,
            ))
        })
        .collect::<Result<_>>()?;
    let m = empirical_sign_measure(&vertices, true_theta, 0.0)?;
    let omb = omb_general(&m, DEFAULT_OMB_TOL);
    // the bias is 2^{d-1} times a shortfall of a proportion
    let k = m.closed_orthant_masses().len() as f64;
    let p = (1.0 / k - 2.0 * omb / k).clamp(0.0, 1.0);
    let std_error = k / 2.0 * (p * (1.0 - p) / draws as f64).sqrt();
    Ok(McEstimate {
        estimate: omb,
        std_error,
        reps: draws,
    })
}

/// Random sign measure with atoms on orthant labels only.
pub fn random_mch_measure(d: usize, rng: &mut SimRng) -> SignMeasure {
    let orthants: Vec<SignVector> = (0..1usize << d)
        .map(|i| SignVector::orthant(d, i))
        .collect();
    random_measure_on(d, orthants, rng)
}

/// Random sign measure with positive mass on at least one edge vector.
pub fn random_general_measure(d: usize, rng: &mut SimRng) -> SignMeasure {
    loop {
        let m = random_measure_on(d, all_sign_vectors(d), rng);
        if m.edge_mass() > 0.0 {
            return m;
        }
    }
}

fn random_measure_on(d: usize, support: Vec<SignVector>, rng: &mut SimRng) -> SignMeasure {
    loop {
        let weights: Vec<f64> = support
            .iter()
            .map(|_| {
                if rng.random::<f64>() < 0.3 {
                    0.0
                } else {
                    -rng.random::<f64>().ln()
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let atoms = support
            .iter()
            .cloned()
            .zip(weights.iter().map(|w| w / total));
        if let Ok(m) = SignMeasure::new(d, atoms) {
            return m;
        }
    }
}

/// One line of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub experiment: String,
    pub d: usize,
    pub batches: Option<usize>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub seed: u64,
}

impl ExperimentRow {
    pub const HEADER: &'static str =
        "experiment,d,B,alpha,delta,estimate,std_error,lower_bound,upper_bound,seed";

    fn new(experiment: &str, d: usize, seed: u64, estimate: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            d,
            batches: None,
            alpha: None,
            delta: None,
            estimate,
            std_error: None,
            lower_bound: None,
            upper_bound: None,
            seed,
        }
    }

    /// Comma-separated fields; absent values are empty.
    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(sig12).unwrap_or_default();
        [
            self.experiment.clone(),
            self.d.to_string(),
            self.batches.map(|b| b.to_string()).unwrap_or_default(),
            opt(self.alpha),
            opt(self.delta),
            sig12(self.estimate),
            opt(self.std_error),
            opt(self.lower_bound),
            opt(self.upper_bound),
            self.seed.to_string(),
        ]
        .join(",")
    }
}

/// Rows plus the verdict of every check made along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<ExperimentRow>,
    pub failed_checks: Vec<String>,
}

impl ExperimentOutcome {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            failed_checks: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failed_checks.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failed_checks.is_empty()
    }
}

const SE_MULTIPLIER: f64 = 3.0;

/// Exact and simulated miscoverage of the two fixture measures.
pub fn experiment_fixture_measures(
    batches: usize,
    reps: usize,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::new();
    for (name, m) in [("fixture_mch", mu_m()), ("fixture_edge", mu_nm())] {
        let exact = oracle_miscoverage(&m, batches)?;
        let enumerated = enumerate_miscoverage(&m, batches)?;
        out.check((exact - enumerated).abs() <= 1e-12, || {
            format!("{name}: oracle {exact} vs enumeration {enumerated}")
        });
        let spec = DistributionSpec::new(Distribution::DiscreteSign(m.clone()))?;
        let mc = mc_miscoverage(&spec, &[0.0, 0.0], batches, reps, seed)?;
        out.check(mc.within(exact, SE_MULTIPLIER, 0.0), || {
            format!("{name}: simulated {} vs exact {exact}", mc.estimate)
        });
        let delta = omb_general(&m, DEFAULT_OMB_TOL);
        let mut exact_row = ExperimentRow::new(&format!("{name}_exact"), 2, seed, exact);
        exact_row.batches = Some(batches);
        exact_row.delta = Some(delta);
        exact_row.lower_bound = Some(lower_bound(batches, delta, 2)?);
        exact_row.upper_bound = Some(upper_bound(batches, delta, 2)?);
        let mut mc_row = exact_row.clone();
        mc_row.experiment = format!("{name}_mc");
        mc_row.estimate = mc.estimate;
        mc_row.std_error = Some(mc.std_error);
        out.rows.push(exact_row);
        out.rows.push(mc_row);
    }
    Ok(out)
}

/// Checks `L <= oracle <= U` (or only the upper bound when `mch` is false,
/// using the dispersal bias) on random sign measures.
pub fn experiment_bounds_sandwich(
    d: usize,
    batch_range: std::ops::RangeInclusive<usize>,
    measures: usize,
    mch: bool,
    seed: u64,
) -> Result<ExperimentOutcome> {
    if d == 0 || d > ORACLE_MAX_DIM {
        return Err(invalid(format!("d must lie in 1..={ORACLE_MAX_DIM}")));
    }
    let name = if mch { "sandwich" } else { "general_upper" };
    let mut out = ExperimentOutcome::new();
    for i in 0..measures {
        let mut rng = stream_rng(seed, i as u64);
        let m = if mch {
            random_mch_measure(d, &mut rng)
        } else {
            random_general_measure(d, &mut rng)
        };
        let delta = if mch {
            o_med_bias_mch(&m)?
        } else {
            omb_general(&m, DEFAULT_OMB_TOL)
        };
        for b in batch_range.clone() {
            let exact = oracle_miscoverage(&m, b)?;
            let upper = upper_bound(b, delta, d)?;
            let mut row = ExperimentRow::new(name, d, seed, exact);
            row.batches = Some(b);
            row.delta = Some(delta);
            row.upper_bound = Some(upper);
            if mch {
                let lower = lower_bound(b, delta, d)?;
                row.lower_bound = Some(lower);
                out.check(lower - 1e-12 <= exact && exact <= upper + 1e-12, || {
                    format!("measure {i}, B={b}: {exact} outside [{lower}, {upper}]")
                });
            } else {
                out.check(exact <= upper + 1e-9, || {
                    format!("measure {i}, B={b}: {exact} > {upper}")
                });
            }
            out.rows.push(row);
        }
    }
    Ok(out)
}

/// Simulated hull miscoverage of `gaussian(0, I_d)` against the zero-bias
/// closed form.
pub fn experiment_gaussian_miscoverage(
    d: usize,
    batches: usize,
    reps: usize,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let spec = DistributionSpec::standard_gaussian(d)?;
    let mc = mc_miscoverage(&spec, &vec![0.0; d], batches, reps, seed)?;
    let lower = lower_bound(batches, 0.0, d)?;
    let upper = upper_bound(batches, 0.0, d)?;
    let mut out = ExperimentOutcome::new();
    out.check(
        mc.estimate >= lower - SE_MULTIPLIER * mc.std_error
            && mc.estimate <= upper + SE_MULTIPLIER * mc.std_error,
        || {
            format!(
                "estimate {} outside [{lower}, {upper}] +- 3 s.e.",
                mc.estimate
            )
        },
    );
    let mut row = ExperimentRow::new("gaussian_miscoverage", d, seed, mc.estimate);
    row.batches = Some(batches);
    row.delta = Some(0.0);
    row.std_error = Some(mc.std_error);
    row.lower_bound = Some(lower);
    row.upper_bound = Some(upper);
    out.rows.push(row);
    Ok(out)
}

/// Full-pipeline coverage for the coordinate mean of `gaussian(0, I_d)`.
/// The check allows `3 s.e. + slack` on either side of `alpha`.
pub fn experiment_coverage(
    d: usize,
    alpha: f64,
    n: usize,
    reps: usize,
    slack: f64,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let spec = DistributionSpec::standard_gaussian(d)?;
    let est = crate::hulc::CoordinateMean { dim: d };
    let rep = mc_hulc_coverage(&spec, &est, &vec![0.0; d], alpha, n, reps, seed)?;
    let mc = rep.miscoverage;
    let mut out = ExperimentOutcome::new();
    out.check(mc.within(alpha, SE_MULTIPLIER, slack), || {
        format!(
            "miscoverage {} not within {alpha} +- (3 s.e. + {slack})",
            mc.estimate
        )
    });
    out.check(rep.failures == 0, || {
        format!("{} estimator failures", rep.failures)
    });
    let mut row = ExperimentRow::new("coverage", d, seed, mc.estimate);
    row.alpha = Some(alpha);
    row.std_error = Some(mc.std_error);
    row.lower_bound = Some(alpha - slack);
    row.upper_bound = Some(alpha + slack);
    out.rows.push(row);
    let mut vol = ExperimentRow::new("coverage_mean_volume", d, seed, rep.mean_volume);
    vol.alpha = Some(alpha);
    out.rows.push(vol);
    Ok(out)
}

/// Orthant bias of the vertex-randomised estimator built from level-`gamma`
/// regions for the mean of `gaussian(0, I_2)`; checked against `gamma / 2`.
pub fn experiment_vertex_bias(
    gamma: f64,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let spec = DistributionSpec::standard_gaussian(2)?;
    let est = crate::hulc::CoordinateMean { dim: 2 };
    let mc = vertex_estimator_bias(&spec, &est, &[0.0, 0.0], gamma, n, draws, seed)?;
    let mut out = ExperimentOutcome::new();
    out.check(
        mc.estimate <= gamma / 2.0 + SE_MULTIPLIER * mc.std_error,
        || {
            format!(
                "vertex estimator bias {} exceeds {} + 3 s.e.",
                mc.estimate,
                gamma / 2.0
            )
        },
    );
    let mut row = ExperimentRow::new("vertex_bias", 2, seed, mc.estimate);
    row.alpha = Some(gamma);
    row.std_error = Some(mc.std_error);
    row.upper_bound = Some(gamma / 2.0);
    out.rows.push(row);
    Ok(out)
}

/// Headline biases of the two worked examples, estimated from `n` draws.
/// Rows carry the expected value in both bound columns; checks allow `tol`.
pub fn experiment_examples(n: usize, tol: f64, seed: u64) -> Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::new();
    let cases = [
        ("example1", Distribution::Example1, 0.0, 0.25),
        ("example2", Distribution::Example2, 0.25, 0.0),
    ];
    for (k, (name, kind, o_expected, t_expected)) in cases.into_iter().enumerate() {
        let spec = DistributionSpec::new(kind)?;
        let pts = sample(&spec, n, seed.wrapping_add(k as u64))?;
        let report = bias_report(&pts, &[0.0, 0.0], TukeyMethod::Exact, 0.0)?;
        for (which, value, expected) in [
            ("o_bias", report.o_bias, o_expected),
            ("t_bias", report.t_bias, t_expected),
        ] {
            out.check((value - expected).abs() <= tol, || {
                format!("{name} {which} = {value}, expected {expected} +- {tol}")
            });
            let mut row = ExperimentRow::new(&format!("{name}_{which}"), 2, seed, value);
            row.lower_bound = Some(expected - tol);
            row.upper_bound = Some(expected + tol);
            out.rows.push(row);
        }
        let mut row = ExperimentRow::new(&format!("{name}_r_bias"), 2, seed, report.r_bias);
        row.upper_bound = Some(report.t_bias);
        out.check(report.r_bias <= report.t_bias + 1e-9, || {
            format!("{name}: r_bias > t_bias")
        });
        out.rows.push(row);
    }
    Ok(out)
}

/// Exact miscoverage of a user-supplied measure by both routes, with bounds.
pub fn experiment_measure(
    m: &SignMeasure,
    batch_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let d = m.dim();
    let delta = omb_general(m, DEFAULT_OMB_TOL);
    let mut out = ExperimentOutcome::new();
    for b in batch_range {
        let exact = oracle_miscoverage(m, b)?;
        if let Ok(enumerated) = enumerate_miscoverage(m, b) {
            out.check((exact - enumerated).abs() <= 1e-12, || {
                format!("B={b}: oracle {exact} vs enumeration {enumerated}")
            });
        }
        let upper = upper_bound(b, delta, d)?;
        out.check(exact <= upper + 1e-9, || {
            format!("B={b}: {exact} above upper bound {upper}")
        });
        let mut row = ExperimentRow::new("measure", d, seed, exact);
        row.batches = Some(b);
        row.delta = Some(delta);
        row.lower_bound = Some(lower_bound(b, delta, d)?);
        row.upper_bound = Some(upper);
        out.rows.push(row);
    }
    Ok(out)
}
