use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rect-hull"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_csv(dir: &Path, name: &str, rows: &[Vec<f64>]) -> String {
    let d = rows[0].len();
    let mut text = (1..=d)
        .map(|j| format!("x_{j}"))
        .collect::<Vec<_>>()
        .join(",");
    text.push('\n');
    for r in rows {
        text.push_str(
            &r.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Deterministic pseudo-Gaussian rows (sum of uniforms from an LCG).
fn gaussianish(n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut state: u64 = 12345;
    let mut uniform = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| (0..12).map(|_| uniform()).sum::<f64>() - 6.0)
                .collect()
        })
        .collect()
}

fn field(csv: &str, row_prefix: &str, col: &str) -> String {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == col).unwrap();
    let line = lines.find(|l| l.starts_with(row_prefix)).unwrap();
    line.split(',').nth(idx).unwrap().to_string()
}

#[test]
fn bounds_table_rows() {
    let o = run(&["bounds", "--alpha", "0.05", "--d", "1", "--B", "1..8"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "6,0,", "U"), "0.03125");
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 9);

    let o = run(&["bounds", "--alpha", "0.05", "--d", "10"]);
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().contains("B_alpha_d=9"), "{out}");
    assert_eq!(field(&out, "1,", "B_alpha_d"), "9");
}

#[test]
fn bounds_upper_column_grows_with_delta() {
    let o = run(&["bounds", "--d", "3", "--B", "4", "--delta", "0:0.5:0.05"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let us: Vec<f64> = out
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(us.len(), 11);
    assert!(us.windows(2).all(|w| w[0] <= w[1]), "{us:?}");
}

#[test]
fn bounds_rejects_bad_ranges() {
    assert_eq!(
        run(&["bounds", "--d", "2", "--delta", "0.6"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["bounds", "--d", "2", "--B", "5..3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["bounds", "--d", "2", "--alpha", "1.5"]).status.code(),
        Some(2)
    );
}

#[test]
fn bias_report_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sym = write_csv(
        dir.path(),
        "sym.csv",
        &[
            vec![1.0, 1.0],
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
        ],
    );
    let o = run(&["bias", "--input", &sym]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "bias,value,method\nr,0,exact\nt,0,exact-sweep\no,0,exact-mch\n"
    );

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x_1,x_2\n1,2\n3,4\n5,oops\n").unwrap();
    let o = run(&["bias", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let d3 = write_csv(
        dir.path(),
        "d3.csv",
        &[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 1.0]],
    );
    assert_eq!(
        run(&["bias", "--input", &d3, "--tukey", "exact"])
            .status
            .code(),
        Some(2)
    );
    let o = run(&[
        "bias",
        "--input",
        &d3,
        "--tukey",
        "sampled",
        "--seed",
        "3",
        "--directions",
        "500",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("sampled-lower-bound"));
}

#[test]
fn bias_reads_stdin() {
    let mut child = bin()
        .args(["bias", "--input", "-", "--center", "0.5,0.5"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"x_1,x_2\n1,1\n2,2\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("r,0.5,exact"));
}

#[test]
fn hulc_region_is_deterministic_and_contains_mean() {
    let dir = tempfile::tempdir().unwrap();
    let rows = gaussianish(600, 2);
    let data = write_csv(dir.path(), "g.csv", &rows);
    let a = run(&["hulc", "--input", &data, "--alpha", "0.1", "--seed", "42"]);
    let b = run(&["hulc", "--input", &data, "--alpha", "0.1", "--seed", "42"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    let lower: Vec<f64> = field(&out, "lower", "x_1")
        .parse()
        .into_iter()
        .chain(field(&out, "lower", "x_2").parse())
        .collect();
    let upper: Vec<f64> = field(&out, "upper", "x_1")
        .parse()
        .into_iter()
        .chain(field(&out, "upper", "x_2").parse())
        .collect();
    for j in 0..2 {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
        assert!(
            lower[j] <= mean && mean <= upper[j],
            "coordinate {j}: {mean} not in [{}, {}]",
            lower[j],
            upper[j]
        );
    }
    let b_star: usize = field(&out, "b_star", "index").parse().unwrap();
    assert!(b_star == 5 || b_star == 6);
    assert_eq!(
        out.lines().filter(|l| l.starts_with("batch,")).count(),
        b_star
    );

    let median = run(&[
        "hulc",
        "--input",
        &data,
        "--seed",
        "42",
        "--estimator",
        "median",
    ]);
    assert!(median.status.success());
    assert_ne!(median.stdout, a.stdout);
}

#[test]
fn hulc_input_and_estimator_failures() {
    let dir = tempfile::tempdir().unwrap();
    let small = write_csv(dir.path(), "small.csv", &gaussianish(3, 2));
    let o = run(&["hulc", "--input", &small, "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 6"), "{}", stderr(&o));

    let data = write_csv(dir.path(), "g.csv", &gaussianish(100, 2));
    let o = run(&[
        "hulc",
        "--input",
        &data,
        "--seed",
        "1",
        "--command",
        "cat >/dev/null; exit 7",
        "--serial",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("batch 0"), "{}", stderr(&o));

    let o = run(&[
        "hulc",
        "--input",
        &data,
        "--seed",
        "1",
        "--command",
        "cat >/dev/null; echo 0.25 -1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("lower,,0.25,-1"));

    assert_eq!(run(&["hulc", "--input", &data]).status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_checked() {
    let args = [
        "simulate", "fixtures", "--B", "3", "--reps", "20000", "--seed", "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert_eq!(
        out.lines().next().unwrap(),
        "experiment,d,B,alpha,delta,estimate,std_error,lower_bound,upper_bound,seed"
    );
    assert_eq!(field(&out, "fixture_mch_exact", "estimate"), "0.472");
    assert_eq!(field(&out, "fixture_edge_exact", "estimate"), "0.484");

    let o = run(&[
        "simulate",
        "sandwich",
        "--d",
        "2",
        "--B",
        "2..6",
        "--measures",
        "200",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1 + 200 * 5);

    let o = run(&[
        "simulate",
        "vertex-bias",
        "--gamma",
        "0.1",
        "--draws",
        "20000",
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_exit_codes() {
    let o = run(&["simulate", "no-such-experiment", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fixtures"), "{}", stderr(&o));

    assert_eq!(run(&["simulate", "fixtures"]).status.code(), Some(2));

    // zero tolerance on a Monte Carlo estimate cannot hold
    let o = run(&[
        "simulate", "examples", "--n", "1000", "--tol", "0", "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("check failed"));
}

#[test]
fn simulate_measure_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(
        &path,
        "sign_1,sign_2,mass\n1,1,0.2\n-1,1,0.2\n-1,-1,0.2\n1,-1,0.4\n",
    )
    .unwrap();
    let o = run(&[
        "simulate",
        "measure",
        "--measure",
        path.to_str().unwrap(),
        "--B",
        "3",
        "--seed",
        "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "measure", "estimate"), "0.472");
}
