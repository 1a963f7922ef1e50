use std::fs;
use std::io::{self, Read, Write};
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rect_hull::bounds::{batch_count, lower_bound, randomized_batches, upper_bound};
use rect_hull::hulc::{
    hulc_region, CoordinateMean, CoordinateMedian, Dataset, Estimator, ExternalEstimator,
};
use rect_hull::median_bias::{bias_report, TukeyMethod, DEFAULT_DIRECTIONS};
use rect_hull::numfmt::sig12;
use rect_hull::sign_measure::SignMeasure;
use rect_hull::simulate::{self, ExperimentOutcome, ExperimentRow};
use rect_hull::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_ESTIMATOR: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rect-hull",
    version,
    about = "Median bias diagnostics and rectangular-hull confidence regions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate miscoverage bounds L and U over a grid of B and delta.
    Bounds(BoundsArgs),
    /// Rectilinear, Tukey and orthant median bias of a sample of estimates.
    Bias(BiasArgs),
    /// Rectangular-hull confidence region for a data set.
    Hulc(HulcArgs),
    /// Run a named simulation experiment.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct BoundsArgs {
    /// Target miscoverage.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Dimension.
    #[arg(long)]
    d: usize,
    /// Batch counts, `a..b` (inclusive) or a single value.
    #[arg(long = "B", value_parser = parse_range, default_value = "1..12")]
    batches: RangeInclusive<usize>,
    /// Bias values: comma list or `start:stop:step`.
    #[arg(long, value_parser = parse_grid, default_value = "0")]
    delta: Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum TukeyChoice {
    /// Exact sweep when d <= 2, sampled otherwise.
    Auto,
    Exact,
    Sampled,
}

#[derive(Args)]
struct BiasArgs {
    /// CSV with header `x_1,...,x_d`; `-` reads standard input.
    #[arg(long)]
    input: PathBuf,
    /// Target point, comma separated (default: origin).
    #[arg(long, value_parser = parse_vector)]
    center: Option<Vector>,
    #[arg(long, value_enum, default_value_t = TukeyChoice::Auto)]
    tukey: TukeyChoice,
    /// Random directions for the sampled Tukey bias.
    #[arg(long, default_value_t = DEFAULT_DIRECTIONS)]
    directions: usize,
    /// Seed for the sampled Tukey bias.
    #[arg(long)]
    seed: Option<u64>,
    /// Coordinates with |x - c| at most this are treated as ties.
    #[arg(long, default_value_t = 0.0)]
    zero_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltinEstimator {
    Mean,
    Median,
}

#[derive(Args)]
struct HulcArgs {
    /// CSV with header `x_1,...,x_d`; `-` reads standard input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BuiltinEstimator::Mean, conflicts_with = "command")]
    estimator: BuiltinEstimator,
    /// Shell command run once per batch: reads the batch as CSV on stdin and
    /// prints the estimate as whitespace-separated numbers.
    #[arg(long)]
    command: Option<String>,
    /// Output dimension of `--command` (default: number of data columns).
    #[arg(long)]
    dim: Option<usize>,
    /// Run `--command` for one batch at a time.
    #[arg(long)]
    serial: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    /// Exact and simulated miscoverage of the two built-in sign measures.
    Fixtures,
    /// L <= exact miscoverage <= U on random measures without axis mass.
    Sandwich,
    /// Exact miscoverage <= U on random measures with axis mass.
    GeneralBound,
    /// Orthant bias of the vertex-randomised estimator.
    VertexBias,
    /// Full-pipeline coverage of the coordinate mean for Gaussian data.
    Coverage,
    /// Orthant and Tukey biases of the two worked examples.
    Examples,
    /// Simulated hull miscoverage for Gaussian draws.
    Miscoverage,
    /// Exact miscoverage and bounds for a sign measure read from `--measure`.
    Measure,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    d: Option<usize>,
    /// Batch counts, `a..b` (inclusive) or a single value.
    #[arg(long = "B", value_parser = parse_range)]
    batches: Option<RangeInclusive<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Number of random sign measures.
    #[arg(long)]
    measures: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Level of each region for `vertex-bias`.
    #[arg(long)]
    gamma: Option<f64>,
    /// Observations per replication (or sample size for `examples`).
    #[arg(long)]
    n: Option<usize>,
    /// Estimator draws for `vertex-bias`.
    #[arg(long)]
    draws: Option<usize>,
    /// Absolute tolerance for `examples`.
    #[arg(long)]
    tol: Option<f64>,
    /// Extra two-sided allowance for `coverage`.
    #[arg(long)]
    slack: Option<f64>,
    /// Sign-measure CSV (`sign_1,...,sign_d,mass`) for `measure`.
    #[arg(long)]
    measure: Option<PathBuf>,
}

#[derive(Clone)]
struct Grid(Vec<f64>);

#[derive(Clone)]
struct Vector(Vec<f64>);

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{t}` is not a count"))
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if a == 0 || a > b {
        return Err(format!("range `{s}` must satisfy 1 <= a <= b"));
    }
    Ok(a..=b)
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a number"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(format!("grid `{s}` needs start <= stop and step > 0"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=count).map(|k| start + k as f64 * step).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => {
            return Err(format!(
                "grid `{s}` must be a comma list or start:stop:step"
            ))
        }
    };
    Ok(Grid(values))
}

fn parse_vector(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Vector)
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::EstimatorFailure { .. } => EXIT_ESTIMATOR,
            Error::Inconsistent(_) => 1,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn read_input(path: &PathBuf) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::usage(format!("reading stdin: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("reading {}: {e}", path.display())))
    }
}

fn read_dataset(path: &PathBuf) -> Result<Dataset, Failure> {
    let text = read_input(path)?;
    Dataset::from_csv(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn row(fields: impl IntoIterator<Item = String>) -> String {
    fields.into_iter().collect::<Vec<_>>().join(",")
}

fn cmd_bounds(a: BoundsArgs, out: &mut String) -> Result<(), Failure> {
    if let Some(&bad) = a.delta.0.iter().find(|v| !(0.0..=0.5).contains(*v)) {
        return Err(Failure::usage(format!("delta {bad} outside [0, 1/2]")));
    }
    let choice = randomized_batches(a.alpha, a.d, 0.0)?;
    let (b_alpha, tau) = (sig12(choice.batch_count as f64), sig12(choice.tau));
    out.push_str(&format!(
        "# alpha={},d={},B_alpha_d={b_alpha},tau={tau}\n",
        sig12(a.alpha),
        a.d
    ));
    out.push_str("B,delta,L,U,B_alpha_d,tau\n");
    for b in a.batches {
        for &delta in &a.delta.0 {
            let l = lower_bound(b, delta, a.d)?;
            let u = upper_bound(b, delta, a.d)?;
            let fields = [
                b.to_string(),
                sig12(delta),
                sig12(l),
                sig12(u),
                b_alpha.clone(),
                tau.clone(),
            ];
            out.push_str(&row(fields));
            out.push('\n');
        }
    }
    Ok(())
}

fn cmd_bias(a: BiasArgs, out: &mut String, log: &mut String) -> Result<(), Failure> {
    let data = read_dataset(&a.input)?;
    let d = data.header().len();
    let center = a.center.map_or_else(|| vec![0.0; d], |c| c.0);
    if center.len() != d {
        return Err(Failure::usage(format!(
            "center has {} coordinates, data has {d}",
            center.len()
        )));
    }
    let sampled = |seed: Option<u64>| -> Result<TukeyMethod, Failure> {
        let seed =
            seed.ok_or_else(|| Failure::usage("--seed is required for the sampled Tukey bias"))?;
        Ok(TukeyMethod::Sampled {
            directions: a.directions,
            seed,
        })
    };
    let method = match a.tukey {
        TukeyChoice::Exact if d > 2 => {
            return Err(Failure::usage(format!(
                "exact Tukey bias needs d <= 2, data has d = {d}"
            )))
        }
        TukeyChoice::Exact => TukeyMethod::Exact,
        TukeyChoice::Auto if d <= 2 => TukeyMethod::Exact,
        TukeyChoice::Auto | TukeyChoice::Sampled => sampled(a.seed)?,
    };
    let report = bias_report(data.rows(), &center, method, a.zero_tol)?;
    out.push_str("bias,value,method\n");
    for (name, value) in [
        ("r", report.r_bias),
        ("t", report.t_bias),
        ("o", report.o_bias),
    ] {
        out.push_str(&format!(
            "{name},{},{}\n",
            sig12(value),
            report.method_note(name)
        ));
    }
    log.push_str(&format!(
        "n={} d={d}: r_bias={} t_bias={} ({}) o_bias={} ({})\n",
        data.len(),
        sig12(report.r_bias),
        sig12(report.t_bias),
        report.method_note("t"),
        sig12(report.o_bias),
        report.method_note("o"),
    ));
    Ok(())
}

struct SerialExternal(ExternalEstimator);

impl Estimator for SerialExternal {
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn estimate(&self, batch: &Dataset) -> Result<Vec<f64>, String> {
        self.0.estimate(batch)
    }
    fn concurrent(&self) -> bool {
        false
    }
}

fn cmd_hulc(a: HulcArgs, out: &mut String) -> Result<(), Failure> {
    let data = read_dataset(&a.input)?;
    let d = data.header().len();
    let est: Box<dyn Estimator> = match (&a.command, a.estimator) {
        (Some(cmd), _) => {
            let ext = ExternalEstimator {
                program: "sh".into(),
                args: vec!["-c".into(), cmd.clone()],
                dim: a.dim.unwrap_or(d),
            };
            if a.serial {
                Box::new(SerialExternal(ext))
            } else {
                Box::new(ext)
            }
        }
        (None, BuiltinEstimator::Mean) => Box::new(CoordinateMean { dim: d }),
        (None, BuiltinEstimator::Median) => Box::new(CoordinateMedian { dim: d }),
    };
    let required = batch_count(a.alpha, est.dim())?;
    if data.len() < required {
        return Err(Failure::usage(format!(
            "need at least {required} observations for alpha={} and d={}, got {}",
            sig12(a.alpha),
            est.dim(),
            data.len()
        )));
    }
    let r = hulc_region(&data, est.as_ref(), a.alpha, a.seed)?;
    let dim = est.dim();
    let names: Vec<String> = if dim == d {
        data.header().to_vec()
    } else {
        (1..=dim).map(|j| format!("x_{j}")).collect()
    };
    let nums = |v: &[f64]| v.iter().map(|x| sig12(*x)).collect::<Vec<_>>();
    out.push_str(&row(["kind".to_string(), "index".to_string()]
        .into_iter()
        .chain(names)));
    out.push('\n');
    for (kind, v) in [("lower", r.region.lower()), ("upper", r.region.upper())] {
        out.push_str(&row([kind.to_string(), String::new()]
            .into_iter()
            .chain(nums(v))));
        out.push('\n');
    }
    let blanks = std::iter::repeat_n(String::new(), dim);
    out.push_str(&row(["b_star".to_string(), r.b_star().to_string()]
        .into_iter()
        .chain(blanks)));
    out.push('\n');
    for (k, e) in r.estimates.iter().enumerate() {
        out.push_str(&row(["batch".to_string(), k.to_string()]
            .into_iter()
            .chain(nums(e))));
        out.push('\n');
    }
    Ok(())
}

fn run_experiment(a: &SimulateArgs) -> Result<ExperimentOutcome, Failure> {
    let seed = a.seed;
    let range = |default: RangeInclusive<usize>| a.batches.clone().unwrap_or(default);
    let single_b = |default: usize| -> Result<usize, Failure> {
        match &a.batches {
            None => Ok(default),
            Some(r) if r.start() == r.end() => Ok(*r.start()),
            Some(_) => Err(Failure::usage("this experiment takes a single --B value")),
        }
    };
    let out = match a.experiment {
        Experiment::Fixtures => {
            simulate::experiment_fixture_measures(single_b(3)?, a.reps.unwrap_or(100_000), seed)?
        }
        Experiment::Sandwich | Experiment::GeneralBound => simulate::experiment_bounds_sandwich(
            a.d.unwrap_or(2),
            range(2..=6),
            a.measures.unwrap_or(200),
            a.experiment == Experiment::Sandwich,
            seed,
        )?,
        Experiment::VertexBias => simulate::experiment_vertex_bias(
            a.gamma.unwrap_or(0.1),
            a.n.unwrap_or(60),
            a.draws.unwrap_or(100_000),
            seed,
        )?,
        Experiment::Coverage => simulate::experiment_coverage(
            a.d.unwrap_or(2),
            a.alpha.unwrap_or(0.1),
            a.n.unwrap_or(600),
            a.reps.unwrap_or(10_000),
            a.slack.unwrap_or(0.01),
            seed,
        )?,
        Experiment::Examples => {
            simulate::experiment_examples(a.n.unwrap_or(1_000_000), a.tol.unwrap_or(0.02), seed)?
        }
        Experiment::Miscoverage => simulate::experiment_gaussian_miscoverage(
            a.d.unwrap_or(2),
            single_b(5)?,
            a.reps.unwrap_or(100_000),
            seed,
        )?,
        Experiment::Measure => {
            let path = a
                .measure
                .as_ref()
                .ok_or_else(|| Failure::usage("--measure FILE is required"))?;
            let m = SignMeasure::from_csv(&read_input(path)?)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            simulate::experiment_measure(&m, range(1..=6), seed)?
        }
    };
    Ok(out)
}

fn cmd_simulate(a: SimulateArgs, out: &mut String, log: &mut String) -> Result<(), Failure> {
    let outcome = run_experiment(&a)?;
    out.push_str(ExperimentRow::HEADER);
    out.push('\n');
    for r in &outcome.rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    if outcome.passed() {
        return Ok(());
    }
    for f in &outcome.failed_checks {
        log.push_str(&format!("check failed: {f}\n"));
    }
    Err(Failure {
        code: EXIT_CHECK,
        message: format!("{} check(s) failed", outcome.failed_checks.len()),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    let mut log = String::new();
    let result = match cli.command {
        Command::Bounds(a) => cmd_bounds(a, &mut out),
        Command::Bias(a) => cmd_bias(a, &mut out, &mut log),
        Command::Hulc(a) => cmd_hulc(a, &mut out),
        Command::Simulate(a) => cmd_simulate(a, &mut out, &mut log),
    };
    // output may be partial on failure (e.g. rows of an experiment whose check failed)
    let _ = io::stdout().write_all(out.as_bytes());
    let _ = io::stderr().write_all(log.as_bytes());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
