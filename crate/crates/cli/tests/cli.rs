//! End-to-end runs of the `klgp` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn klgp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klgp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = klgp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn with_sets(command: &[&str], sets: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = command.iter().map(|s| s.to_string()).collect();
    for s in sets {
        args.push("--set".into());
        args.push(s.to_string());
    }
    args
}

fn run_sets(dir: &Path, command: &[&str], sets: &[&str]) -> Output {
    let args = with_sets(command, sets);
    klgp(dir, &args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn ok_sets(dir: &Path, command: &[&str], sets: &[&str]) -> String {
    let out = run_sets(dir, command, sets);
    assert!(
        out.status.success(),
        "{command:?} {sets:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Numeric columns of a CSV written by the binary, keyed by header.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_table(path);
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j]).collect()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn constant_kernel_has_a_single_eigenvalue() {
    let dir = TempDir::new().unwrap();
    ok_sets(
        dir.path(),
        &["kl-build"],
        &["kernel=constant", "amplitude=1", "n=12"],
    );
    let lambda = column(&dir.path().join("eigenvalues.csv"), "lambda");
    assert_eq!(lambda.len(), 12);
    assert!((lambda[0] - 2.0).abs() <= 1e-12, "{}", lambda[0]);
    assert!(lambda[1..].iter().all(|v| v.abs() <= 1e-12));
    assert!(dir.path().join("expansion.klgp").exists());
}

#[test]
fn brownian_leading_eigenvalue() {
    let dir = TempDir::new().unwrap();
    ok_sets(dir.path(), &["kl-build"], &["kernel=brownian", "n=40"]);
    let lambda = column(&dir.path().join("eigenvalues.csv"), "lambda");
    // Eigenvalues of min(x, y) on [0, 1] are 1 / ((k - 1/2)² π²).
    for (k, v) in lambda.iter().take(5).enumerate() {
        let exact = 1.0 / ((k as f64 + 0.5) * std::f64::consts::PI).powi(2);
        assert!(
            (v - exact).abs() <= 1e-12,
            "λ{} = {v}, exact {exact}",
            k + 1
        );
    }
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "kernel = \"se\"\nlengthscale = 0.5\nn = 30\nm = 4\neigenvalues = \"from-file.csv\"\n",
    )
    .unwrap();
    run_ok(
        dir.path(),
        &[
            "kl-build",
            "--config",
            "run.toml",
            "--set",
            "eigenvalues=over.csv",
            "--set",
            "format=tsv",
        ],
    );
    assert!(!dir.path().join("from-file.csv").exists());
    let text = fs::read_to_string(dir.path().join("over.csv")).unwrap();
    assert!(text.starts_with("i\tlambda\n"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn unknown_keys_exit_with_usage_code() {
    let dir = TempDir::new().unwrap();
    let out = run_sets(
        dir.path(),
        &["kl-build"],
        &["kernel=se", "lengthscale=0.2", "n=10", "colour=red"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert!(files_in(dir.path()).is_empty());
}

#[test]
fn malformed_rows_name_their_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("d.csv"), "x,y\n0.1,1\n0.2,2\n0.3,oops\n").unwrap();
    let out = run_sets(
        dir.path(),
        &["fit-predict"],
        &[
            "kernel=se",
            "lengthscale=0.3",
            "n=20",
            "data=d.csv",
            "noise=0.1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 4"), "{stderr}");

    fs::write(dir.path().join("d.csv"), "x,y\n0.1,1\n0.2\n").unwrap();
    let out = run_sets(
        dir.path(),
        &["fit-predict"],
        &[
            "kernel=se",
            "lengthscale=0.3",
            "n=20",
            "data=d.csv",
            "noise=0.1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn wrong_header_and_outside_rows_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("d.csv"), "t,value\n0.1,1\n").unwrap();
    let out = run_sets(
        dir.path(),
        &["fit-predict"],
        &[
            "kernel=se",
            "lengthscale=0.3",
            "n=20",
            "data=d.csv",
            "noise=0.1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("header"));

    fs::write(dir.path().join("d.csv"), "x,y\n0.1,1\n0.5,2\n1.5,3\n").unwrap();
    let out = run_sets(
        dir.path(),
        &["fit-predict"],
        &[
            "kernel=se",
            "lengthscale=0.3",
            "n=20",
            "data=d.csv",
            "noise=0.1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("row 3") || stderr.contains("row 2"),
        "{stderr}"
    );
    assert_eq!(files_in(dir.path()), vec!["d.csv"]);
}

#[test]
fn numerical_failures_exit_with_code_three() {
    let dir = TempDir::new().unwrap();
    let out = run_sets(
        dir.path(),
        &["kl-build"],
        &["kernel=se", "lengthscale=0.3", "dimension=2", "n=500"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(files_in(dir.path()).is_empty());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let steps: [(&[&str], &[&str]); 3] = [
        (
            &["synth"],
            &["count=40", "noise=0.1", "seed=7", "output=d.csv"],
        ),
        (
            &["kl-build"],
            &["kernel=matern", "nu=1.5", "lengthscale=0.3", "n=30", "m=12"],
        ),
        (
            &["fit-predict"],
            &[
                "expansion=expansion.klgp",
                "data=d.csv",
                "noise=0.1",
                "grid=17",
            ],
        ),
    ];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        for (command, sets) in steps {
            ok_sets(dir.path(), command, sets);
        }
        snapshots.push(
            [
                "d.csv",
                "expansion.klgp",
                "eigenvalues.csv",
                "predictions.csv",
            ]
            .map(|f| fs::read(dir.path().join(f)).unwrap()),
        );
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn zero_targets_give_zero_means() {
    let dir = TempDir::new().unwrap();
    let mut data = String::from("x,y\n");
    for i in 0..25 {
        data.push_str(&format!("{},0\n", -0.9 + 0.075 * i as f64));
    }
    fs::write(dir.path().join("zero.csv"), data).unwrap();
    ok_sets(
        dir.path(),
        &["fit-predict"],
        &[
            "kernel=se",
            "lengthscale=0.4",
            "n=30",
            "data=zero.csv",
            "noise=0.05",
        ],
    );
    let path = dir.path().join("predictions.csv");
    assert_eq!(column(&path, "x").len(), 101);
    assert!(column(&path, "mean").iter().all(|&m| m == 0.0));
    let latent = column(&path, "latent_variance");
    let predictive = column(&path, "predictive_variance");
    for (l, p) in latent.iter().zip(&predictive) {
        assert!(*l >= 0.0 && *l <= 1.0 + 1e-9);
        assert!((p - l - 0.05f64.powi(2)).abs() <= 1e-12);
    }
}

#[test]
fn synthetic_fit_residuals_match_the_noise() {
    let dir = TempDir::new().unwrap();
    ok_sets(
        dir.path(),
        &["synth"],
        &["count=400", "noise=0.1", "seed=3", "output=d.csv"],
    );
    let stdout = ok_sets(
        dir.path(),
        &["fit-predict"],
        &[
            "kernel=se",
            "lengthscale=0.3",
            "n=40",
            "m=25",
            "data=d.csv",
            "noise=0.1",
        ],
    );
    let rms: f64 = stdout
        .split("residual RMS ")
        .nth(1)
        .and_then(|s| s.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    // Fitting absorbs a few degrees of freedom, so the RMS sits a little
    // below the injected SD.
    assert!((0.07..0.12).contains(&rms), "rms {rms}");
}

#[test]
fn two_d_round_trip_through_a_stored_expansion() {
    let dir = TempDir::new().unwrap();
    ok_sets(
        dir.path(),
        &["synth"],
        &[
            "function=plane-sine",
            "count=300",
            "noise=0.05",
            "output=p.csv",
        ],
    );
    ok_sets(
        dir.path(),
        &["kl-build"],
        &[
            "kernel=se",
            "lengthscale=0.5",
            "dimension=2",
            "n=12",
            "m=40",
            "expansion=e2.klgp",
        ],
    );
    fs::write(dir.path().join("q.csv"), "x1,x2\n0.2,-0.3\n-0.7,0.6\n").unwrap();
    ok_sets(
        dir.path(),
        &["fit-predict"],
        &[
            "expansion=e2.klgp",
            "data=p.csv",
            "noise=0.05",
            "queries=q.csv",
        ],
    );
    let (header, rows) = read_table(&dir.path().join("predictions.csv"));
    assert_eq!(
        header,
        ["x1", "x2", "mean", "latent_variance", "predictive_variance"]
    );
    for row in &rows {
        let truth = -row[1] + (6.0 * row[0]).sin();
        assert!((row[2] - truth).abs() <= 0.1, "{row:?} vs {truth}");
    }
}

#[test]
fn bench_without_timing_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let first = run_ok(
        dir.path(),
        &["bench", "se-1d", "--no-timing", "--set", "output=a.csv"],
    );
    run_ok(
        dir.path(),
        &["bench", "se-1d", "--no-timing", "--set", "output=b.csv"],
    );
    assert!(first.starts_with("n,m,delta_max,tail,eps\n"));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let eps = column(&dir.path().join("a.csv"), "eps");
    assert_eq!(eps.len(), 10);
    assert!(eps[9] < 1e-12 && eps[0] > 0.1);

    let out = klgp(dir.path(), &["bench", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bayes_writes_report_moments_and_series() {
    let dir = TempDir::new().unwrap();
    ok_sets(
        dir.path(),
        &["synth"],
        &["count=30", "noise=0.1", "output=d.csv"],
    );
    let sets = [
        "kernel=se",
        "data=d.csv",
        "n=60",
        "lengthscale_nodes=8",
        "alpha_nodes=12",
        "sigma_nodes=12",
        "scan_nodes=10",
    ];
    ok_sets(dir.path(), &["bayes"], &sets);
    let report = fs::read(dir.path().join("bayes_report.txt")).unwrap();
    let moments = fs::read(dir.path().join("bayes_moments.csv")).unwrap();
    ok_sets(dir.path(), &["bayes"], &sets);
    assert_eq!(
        report,
        fs::read(dir.path().join("bayes_report.txt")).unwrap()
    );
    assert_eq!(
        moments,
        fs::read(dir.path().join("bayes_moments.csv")).unwrap()
    );

    let text = String::from_utf8(moments).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "parameter,mean,sd");
    for (line, name) in lines[1..].iter().zip(["alpha", "sigma", "lengthscale"]) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], name);
        let (mean, sd): (f64, f64) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
        assert!(mean > 0.0 && sd > 0.0, "{line}");
    }
    assert_eq!(lines.len(), 4);
    assert!(column(&dir.path().join("bayes_series.csv"), "coefficient").len() == 60);
}

/// Ordinary Legendre series on `[-1, 1]` by the three-term recurrence.
fn legendre_sum(coefficients: &[f64], x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    let mut sum = coefficients[0];
    for (k, c) in coefficients.iter().enumerate().skip(1) {
        if k > 1 {
            let next = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = next;
        }
        sum += c * p1;
    }
    sum
}

#[test]
fn pinned_bayes_reproduces_the_ridge_fit() {
    let dir = TempDir::new().unwrap();
    ok_sets(
        dir.path(),
        &["synth"],
        &["count=50", "noise=0.1", "seed=11", "output=d.csv"],
    );
    ok_sets(
        dir.path(),
        &["bayes"],
        &[
            "kernel=se",
            "data=d.csv",
            "n=60",
            "lengthscale_lo=0.2999999995",
            "lengthscale_hi=0.3000000005",
            "lengthscale_nodes=1",
            "alpha=1.7",
            "sigma=0.1",
        ],
    );
    ok_sets(
        dir.path(),
        &["fit-predict"],
        &[
            "kernel=se",
            "amplitude=1.7",
            "lengthscale=0.3",
            "n=60",
            "data=d.csv",
            "noise=0.1",
            "grid=21",
        ],
    );
    let series = column(&dir.path().join("bayes_series.csv"), "coefficient");
    let predictions = dir.path().join("predictions.csv");
    for (x, mean) in column(&predictions, "x")
        .iter()
        .zip(column(&predictions, "mean"))
    {
        let bayes = legendre_sum(&series, *x);
        assert!((bayes - mean).abs() <= 1e-6, "x = {x}: {bayes} vs {mean}");
    }
}

#[test]
fn default_bayes_run_on_ten_points() {
    let dir = TempDir::new().unwrap();
    ok_sets(
        dir.path(),
        &["synth"],
        &["count=10", "noise=0.1", "output=d.csv"],
    );
    let stdout = ok_sets(
        dir.path(),
        &["bayes"],
        &["kernel=matern", "nu=1.5", "data=d.csv"],
    );
    assert!(stdout.contains("inference"), "{stdout}");
    let text = fs::read_to_string(dir.path().join("bayes_moments.csv")).unwrap();
    for line in text.lines().skip(1) {
        let values: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(values.iter().all(|v| v.is_finite() && *v > 0.0), "{line}");
    }
    let report = fs::read_to_string(dir.path().join("bayes_report.txt")).unwrap();
    assert!(report.contains("kernel: matern") && report.contains("order: 140"));
    assert_eq!(
        column(&dir.path().join("bayes_series.csv"), "coefficient").len(),
        140
    );
}
