//! Rectangular-hull confidence regions built by sample splitting.
//!
//! The data are split at random into `B*` equal batches, an estimator is run
//! on each batch, and the axis-aligned bounding box of the batch estimates is
//! returned. `B*` is randomised between `B_{alpha,d} - 1` and `B_{alpha,d}` so
//! that the zero-bias miscoverage is exactly `alpha`.

use std::io::Write;
use std::process::{Command, Stdio};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::bounds::{batch_count, randomized_batches, BatchChoice};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, SimRng};

/// Default inflation factor for [`vertex_randomized_estimator`].
pub const DEFAULT_VERTEX_INFLATE: f64 = 1e-6;

/// An axis-aligned box `prod_j [lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Rect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid("box bounds must be nonempty and of equal length"));
        }
        if let Some(j) = (0..lower.len()).find(|&j| !(lower[j] <= upper[j])) {
            return Err(invalid(format!(
                "box side {j} has lower {} > upper {}",
                lower[j], upper[j]
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn point(p: &[f64]) -> Self {
        Self {
            lower: p.to_vec(),
            upper: p.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Closed-box membership.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| l <= x && x <= u)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }
}

/// Componentwise min/max box of a nonempty point set.
pub fn rect_hull(points: &[Vec<f64>]) -> Result<Rect> {
    let first = points
        .first()
        .ok_or_else(|| invalid("rectangular hull of an empty set"))?;
    let d = first.len();
    let mut lower = first.clone();
    let mut upper = first.clone();
    for (i, p) in points.iter().enumerate().skip(1) {
        if p.len() != d {
            return Err(invalid(format!(
                "point {i} has dimension {}, expected {d}",
                p.len()
            )));
        }
        for j in 0..d {
            lower[j] = lower[j].min(p[j]);
            upper[j] = upper[j].max(p[j]);
        }
    }
    Rect::new(lower, upper)
}

/// Numeric observations with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(header: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("dataset needs at least one row"));
        }
        if let Some((i, r)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != header.len())
        {
            return Err(invalid(format!(
                "row {i} has {} fields, header has {}",
                r.len(),
                header.len()
            )));
        }
        Ok(Self { header, rows })
    }

    /// Dataset with default column names `x_1, ..., x_d`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        Self::new((1..=d).map(|j| format!("x_{j}")).collect(), rows)
    }

    /// Parses a header row followed by rows of finite decimal numbers.
    /// Errors name the offending line (1-based, header is line 1).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| invalid(format!("line 1: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(invalid("line 1: missing header"));
        }
        let mut rows = Vec::new();
        let mut record = csv::StringRecord::new();
        loop {
            let more = reader.read_record(&mut record).map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                invalid(format!("line {line}: {e}"))
            })?;
            if !more {
                break;
            }
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(invalid(format!(
                    "line {line}: expected {} fields, found {}",
                    header.len(),
                    record.len()
                )));
            }
            let row = record
                .iter()
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(invalid(format!(
                        "line {line}: `{f}` is not a finite number"
                    ))),
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(invalid("no data rows"));
        }
        Self::new(header, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            header: self.header.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Header line plus one line per row, LF terminated.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// A procedure mapping a batch of observations to a point in `R^d`.
pub trait Estimator: Send + Sync {
    fn dim(&self) -> usize;

    /// Returns the estimate, or a failure message.
    fn estimate(&self, batch: &Dataset) -> std::result::Result<Vec<f64>, String>;

    /// Whether batches may be estimated concurrently.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Column means.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateMean {
    pub dim: usize,
}

impl Estimator for CoordinateMean {
    fn dim(&self) -> usize {
        self.dim
    }

    fn estimate(&self, batch: &Dataset) -> std::result::Result<Vec<f64>, String> {
        let n = batch.len() as f64;
        let mut out = vec![0.0; self.dim];
        for r in batch.rows() {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        Ok(out.into_iter().map(|s| s / n).collect())
    }
}

/// Column medians (average of the two middle values for even sizes).
#[derive(Debug, Clone, Copy)]
pub struct CoordinateMedian {
    pub dim: usize,
}

impl Estimator for CoordinateMedian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn estimate(&self, batch: &Dataset) -> std::result::Result<Vec<f64>, String> {
        (0..self.dim)
            .map(|j| {
                let mut col: Vec<f64> = batch.rows().iter().map(|r| r[j]).collect();
                col.sort_by(f64::total_cmp);
                let n = col.len();
                if n == 0 {
                    return Err("empty batch".to_string());
                }
                Ok(if n % 2 == 1 {
                    col[n / 2]
                } else {
                    0.5 * (col[n / 2 - 1] + col[n / 2])
                })
            })
            .collect()
    }
}

/// Ignores the data and returns a fixed point.
#[derive(Debug, Clone)]
pub struct ConstantEstimator(pub Vec<f64>);

impl Estimator for ConstantEstimator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn estimate(&self, _batch: &Dataset) -> std::result::Result<Vec<f64>, String> {
        Ok(self.0.clone())
    }
}

/// Runs a child process per batch. The batch is written to its standard
/// input as CSV (header plus one row per observation); it must print exactly
/// `dim` whitespace-separated numbers and exit with status 0.
#[derive(Debug, Clone)]
pub struct ExternalEstimator {
    pub program: String,
    pub args: Vec<String>,
    pub dim: usize,
}

impl Estimator for ExternalEstimator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn estimate(&self, batch: &Dataset) -> std::result::Result<Vec<f64>, String> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start `{}`: {e}", self.program))?;
        let payload = batch.to_csv();
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = std::thread::spawn(move || {
            // A child that exits without reading its input is not an error here;
            // its exit status decides.
            let _ = stdin.write_all(payload.as_bytes());
        });
        let output = child
            .wait_with_output()
            .map_err(|e| format!("waiting for `{}`: {e}", self.program))?;
        let _ = writer.join();
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let mut msg = format!("`{}` exited with {}", self.program, output.status);
            if !stderr.trim().is_empty() {
                msg.push_str(&format!(": {}", stderr.trim()));
            }
            return Err(msg);
        }
        let text = String::from_utf8_lossy(&output.stdout);
        let values = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| format!("non-numeric output `{t}`"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.len() != self.dim {
            return Err(format!(
                "expected {} numbers, got {}",
                self.dim,
                values.len()
            ));
        }
        Ok(values)
    }
}

/// Randomly partitions `0..n` into `b` disjoint sets of size `n / b`,
/// discarding the `n mod b` left-over indices.
pub fn split_batches(n: usize, b: usize, rng: &mut SimRng) -> Result<Vec<Vec<usize>>> {
    if b == 0 {
        return Err(invalid("number of batches must be >= 1"));
    }
    if n < b {
        return Err(Error::InsufficientData {
            required: b,
            available: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let size = n / b;
    Ok(idx.chunks_exact(size).take(b).map(|c| c.to_vec()).collect())
}

/// Output of [`hulc_region`].
#[derive(Debug, Clone, PartialEq)]
pub struct HulcRegion {
    pub region: Rect,
    pub choice: BatchChoice,
    /// One estimate per batch, in batch order.
    pub estimates: Vec<Vec<f64>>,
}

impl HulcRegion {
    pub fn b_star(&self) -> usize {
        self.choice.b_star
    }
}

/// Rectangular-hull confidence region with miscoverage `alpha` at zero bias,
/// seeded by `seed`.
pub fn hulc_region(
    data: &Dataset,
    est: &dyn Estimator,
    alpha: f64,
    seed: u64,
) -> Result<HulcRegion> {
    hulc_region_with_rng(data, est, alpha, &mut stream_rng(seed, 0))
}

/// As [`hulc_region`], drawing from a caller-supplied generator.
pub fn hulc_region_with_rng(
    data: &Dataset,
    est: &dyn Estimator,
    alpha: f64,
    rng: &mut SimRng,
) -> Result<HulcRegion> {
    let d = est.dim();
    let required = batch_count(alpha, d)?;
    if data.len() < required {
        return Err(Error::InsufficientData {
            required,
            available: data.len(),
        });
    }
    let choice = randomized_batches(alpha, d, rng.random::<f64>())?;
    let batches = split_batches(data.len(), choice.b_star, rng)?;

    let run = |(k, idx): (usize, &Vec<usize>)| -> Result<Vec<f64>> {
        let out = est
            .estimate(&data.select(idx))
            .map_err(|message| Error::EstimatorFailure { batch: k, message })?;
        if out.len() != d || out.iter().any(|v| !v.is_finite()) {
            return Err(Error::EstimatorFailure {
                batch: k,
                message: format!("expected {d} finite values, got {out:?}"),
            });
        }
        Ok(out)
    };
    let results: Vec<Result<Vec<f64>>> = if est.concurrent() && batches.len() > 1 {
        batches.par_iter().enumerate().map(run).collect()
    } else {
        batches.iter().enumerate().map(run).collect()
    };
    let estimates = results.into_iter().collect::<Result<Vec<_>>>()?;
    let region = rect_hull(&estimates)?;
    Ok(HulcRegion {
        region,
        choice,
        estimates,
    })
}

/// A union of boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxUnion {
    boxes: Vec<Rect>,
}

impl BoxUnion {
    pub fn new(boxes: Vec<Rect>) -> Result<Self> {
        let d = boxes
            .first()
            .ok_or_else(|| invalid("union needs at least one box"))?
            .dim();
        if boxes.iter().any(|b| b.dim() != d) {
            return Err(invalid("all boxes in a union must share a dimension"));
        }
        Ok(Self { boxes })
    }

    pub fn boxes(&self) -> &[Rect] {
        &self.boxes
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }
}

/// `ceil(log_gamma(alpha))`: how many independent level-`gamma` regions are
/// needed for a union with miscoverage `alpha`.
pub fn amplified_batch_count(gamma: f64, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= gamma && gamma < 1.0) {
        return Err(invalid(format!(
            "need 0 < alpha <= gamma < 1, got alpha={alpha}, gamma={gamma}"
        )));
    }
    let ratio = alpha.ln() / gamma.ln();
    // ratios that are integers up to rounding must not round up
    Ok(((ratio - 1e-9).ceil() as usize).max(1))
}

/// Unions regions computed on disjoint batches; each region has miscoverage
/// at most `gamma`, so the union's is at most `gamma^k <= alpha`.
pub fn amplify_region(regions: Vec<Rect>, gamma: f64, alpha: f64) -> Result<BoxUnion> {
    let need = amplified_batch_count(gamma, alpha)?;
    if regions.len() != need {
        return Err(invalid(format!(
            "expected {need} regions for gamma={gamma}, alpha={alpha}, got {}",
            regions.len()
        )));
    }
    BoxUnion::new(regions)
}

/// Randomised vertex of an inflated box.
///
/// Each side is widened by `U_j * Δ_j` with `Δ_j = δ * max(u_j - l_j, δ)` and
/// independent `U_j ~ Uniform(0, 1)`; each coordinate then takes the low or
/// high end with probability 1/2, independently. Coordinates are continuous
/// so the resulting law puts no mass on coordinate hyperplanes.
pub fn vertex_randomized_estimator(
    region: &Rect,
    delta_inflate: f64,
    rng: &mut SimRng,
) -> Vec<f64> {
    assert!(delta_inflate > 0.0, "inflation must be positive");
    region
        .lower()
        .iter()
        .zip(region.upper())
        .map(|(&l, &u)| {
            let spread = delta_inflate * (u - l).max(delta_inflate);
            let w: f64 = rng.random();
            if rng.random::<bool>() {
                u + w * spread
            } else {
                l - w * spread
            }
        })
        .collect()
}
