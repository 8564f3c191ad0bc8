//! The `kl-build`, `fit-predict`, `bayes` and `synth` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use klgp::synthetic::{cos_exp_dataset, plane_sine_dataset};
use klgp::{
    choose_order, predict_many, read_expansion, ridge_fit, write_expansion, AxisGrid,
    BasisExpansion, BayesFitter, BayesGrid, Dataset, DesignMatrix, Interval, KernelFamily,
    KernelSpec, KlExpansion, KlExpansion2d, PriorSpec, Rectangle, StoredExpansion,
};

use crate::config::RunConfig;
use crate::io::{float, read_numeric_csv, render_table, Outputs, TableFormat};
use crate::CliError;

const KERNEL_KEYS_REQUIRED: &str = "set `kernel` (se, matern, constant or brownian)";

fn kernel_spec(cfg: &RunConfig, dimension: usize) -> Result<KernelSpec<f64>, CliError> {
    let family = cfg
        .kernel
        .as_deref()
        .ok_or_else(|| CliError::Usage(KERNEL_KEYS_REQUIRED.into()))?;
    let mut record = vec![
        ("family", family.to_string()),
        ("dimension", dimension.to_string()),
    ];
    if let Some(nu) = cfg.nu {
        record.push(("nu", float(nu)));
    }
    if let Some(a) = cfg.amplitude {
        record.push(("amplitude", float(a)));
    }
    if let Some(l) = cfg.lengthscale {
        record.push(("lengthscale", float(l)));
    }
    Ok(KernelSpec::from_record(
        record.iter().map(|(k, v)| (*k, v.as_str())),
    )?)
}

/// The lengthscale-free family named in the config, for commands that
/// integrate over the lengthscale.
fn kernel_family(cfg: &RunConfig) -> Result<KernelFamily, CliError> {
    let probe = RunConfig {
        lengthscale: Some(1.0),
        ..cfg.clone()
    };
    Ok(kernel_spec(&probe, 1)?.family())
}

/// `[lo, hi]` from the config. The Brownian kernel defaults to `[0, 1]`,
/// every other kernel to `[-1, 1]`.
fn interval(cfg: &RunConfig, family: KernelFamily) -> Result<Interval<f64>, CliError> {
    match cfg.domain.as_deref() {
        None if family == KernelFamily::Brownian => Ok(Interval::new(0.0, 1.0)?),
        None => Ok(Interval::reference()),
        Some(&[lo, hi]) => Ok(Interval::new(lo, hi)?),
        Some(other) => Err(CliError::Usage(format!(
            "domain needs [lo, hi] in 1D, got {} values",
            other.len()
        ))),
    }
}

fn rectangle(cfg: &RunConfig) -> Result<Rectangle, CliError> {
    match cfg.domain.as_deref() {
        None => Ok(Rectangle::reference()),
        Some(&[xlo, xhi, ylo, yhi]) => Ok(Rectangle::new(
            Interval::new(xlo, xhi)?,
            Interval::new(ylo, yhi)?,
        )),
        Some(other) => Err(CliError::Usage(format!(
            "domain needs [xlo, xhi, ylo, yhi] in 2D, got {} values",
            other.len()
        ))),
    }
}

fn dimension(cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.dimension.unwrap_or(1) {
        d @ (1 | 2) => Ok(d),
        d => Err(CliError::Usage(format!(
            "dimension must be 1 or 2, got {d}"
        ))),
    }
}

fn table_path(explicit: &Option<PathBuf>, stem: &str, format: TableFormat) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        PathBuf::from(match format {
            TableFormat::Csv => format!("{stem}.csv"),
            TableFormat::Tsv => format!("{stem}.tsv"),
        })
    })
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn kl_build(cfg: &RunConfig) -> Result<(), CliError> {
    let dim = dimension(cfg)?;
    let spec = kernel_spec(cfg, dim)?;
    let format = TableFormat::parse(cfg.format.as_deref())?;
    let expansion_path = cfg
        .expansion
        .clone()
        .unwrap_or_else(|| PathBuf::from("expansion.klgp"));
    let eigen_path = table_path(&cfg.eigenvalues, "eigenvalues", format);
    let start = Instant::now();

    let (stored, spectrum, summary) = if dim == 1 {
        let domain = interval(cfg, spec.family())?;
        let (n, m) = match (cfg.target, cfg.n) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "give either `target` or `n`, not both".into(),
                ))
            }
            (Some(target), None) => {
                if cfg.m.is_some() {
                    return Err(CliError::Usage(
                        "`m` is chosen automatically with `target`".into(),
                    ));
                }
                let choice = choose_order(&spec, domain, target)?;
                if !choice.converged {
                    eprintln!(
                        "warning: order cap reached; proxy error {:e} exceeds target {target:e}",
                        choice.report.proxy()
                    );
                }
                (choice.n, choice.m)
            }
            (None, Some(n)) => (n, cfg.m.unwrap_or(n)),
            (None, None) => return Err(CliError::Usage("set `n` or `target`".into())),
        };
        if m > n {
            return Err(CliError::Usage(format!("m = {m} exceeds n = {n}")));
        }
        let kl = KlExpansion::build(&spec, domain, n)?.truncate(m)?;
        // Adding zero turns an empty tail's `-0` into `0`.
        let summary = format!(
            "{} expansion of {spec} on {domain}: n = {n}, m = {m}, truncation tail {:e}",
            kl.method().tag(),
            kl.truncation_tail() + 0.0
        );
        let spectrum = kl.spectrum().to_vec();
        (StoredExpansion::from(kl), spectrum, summary)
    } else {
        if cfg.target.is_some() {
            return Err(CliError::Usage("`target` is only supported in 1D".into()));
        }
        let rect = rectangle(cfg)?;
        let nx = cfg.n.ok_or_else(|| CliError::Usage("set `n`".into()))?;
        let ny = cfg.n_y.unwrap_or(nx);
        let m = cfg.m.unwrap_or(nx * ny);
        if m > nx * ny {
            return Err(CliError::Usage(format!(
                "m = {m} exceeds n * n_y = {}",
                nx * ny
            )));
        }
        let kl = KlExpansion2d::from_spec(&spec, rect, nx, ny)?.truncate(m)?;
        let summary = format!(
            "tensor expansion of {spec} on {rect}: n = {nx}x{ny}, m = {m}, truncation tail {:e}",
            kl.truncation_tail() + 0.0
        );
        let spectrum = kl.spectrum().to_vec();
        (StoredExpansion::from(kl), spectrum, summary)
    };
    let elapsed = start.elapsed().as_secs_f64();

    let rows: Vec<Vec<String>> = spectrum
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), float(*v)])
        .collect();
    let mut outputs = Outputs::default();
    outputs.add(expansion_path, write_expansion(&stored));
    outputs.add(eigen_path, render_table(format, &["i", "lambda"], &rows)?);
    let written = outputs.commit()?;
    println!("{summary}");
    println!("build time {elapsed:.3} s");
    report_written(&written);
    Ok(())
}

/// A 1D or 2D input point as read from and written to tables.
trait TablePoint: Copy {
    const COLUMNS: &'static [&'static str];
    fn from_row(row: &[f64]) -> Self;
    fn fields(self) -> Vec<String>;
}

impl TablePoint for f64 {
    const COLUMNS: &'static [&'static str] = &["x"];
    fn from_row(row: &[f64]) -> Self {
        row[0]
    }
    fn fields(self) -> Vec<String> {
        vec![float(self)]
    }
}

impl TablePoint for [f64; 2] {
    const COLUMNS: &'static [&'static str] = &["x1", "x2"];
    fn from_row(row: &[f64]) -> Self {
        [row[0], row[1]]
    }
    fn fields(self) -> Vec<String> {
        vec![float(self[0]), float(self[1])]
    }
}

fn equispaced(domain: Interval<f64>, count: usize) -> Vec<f64> {
    match count {
        1 => vec![domain.midpoint()],
        _ => (0..count)
            .map(|i| domain.lo() + domain.width() * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn read_dataset<P: TablePoint>(path: &Path, noise: f64) -> Result<Dataset<P>, CliError> {
    let mut columns: Vec<&str> = P::COLUMNS.to_vec();
    columns.push("y");
    let (_, rows) = read_numeric_csv(path, &[&columns])?;
    let inputs = rows.iter().map(|r| P::from_row(r)).collect();
    let targets = rows.iter().map(|r| r[P::COLUMNS.len()]).collect();
    Ok(Dataset::new(inputs, targets, noise)?)
}

fn read_queries<P: TablePoint>(path: &Path) -> Result<Vec<P>, CliError> {
    let (_, rows) = read_numeric_csv(path, &[P::COLUMNS])?;
    Ok(rows.iter().map(|r| P::from_row(r)).collect())
}

pub fn fit_predict(cfg: &RunConfig) -> Result<(), CliError> {
    let data_path = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("set `data` to a CSV file".into()))?;
    let noise = cfg
        .noise
        .ok_or_else(|| CliError::Usage("set `noise` to the observation noise SD".into()))?;
    if noise.is_nan() || noise <= 0.0 {
        return Err(CliError::Usage(format!(
            "noise must be positive, got {noise}"
        )));
    }
    let format = TableFormat::parse(cfg.format.as_deref())?;
    let start = Instant::now();
    let stored = match &cfg.expansion {
        Some(path) => {
            let inline_keys = [
                cfg.kernel.is_some(),
                cfg.nu.is_some(),
                cfg.amplitude.is_some(),
                cfg.lengthscale.is_some(),
                cfg.dimension.is_some(),
                cfg.domain.is_some(),
                cfg.n.is_some(),
                cfg.n_y.is_some(),
            ];
            if inline_keys.iter().any(|&k| k) {
                return Err(CliError::Usage(
                    "kernel and order keys conflict with a stored `expansion`".into(),
                ));
            }
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let stored = read_expansion(&text)?;
            match (stored, cfg.m) {
                (StoredExpansion::OneD(kl), Some(m)) => StoredExpansion::from(kl.truncate(m)?),
                (StoredExpansion::TwoD(kl), Some(m)) => StoredExpansion::from(kl.truncate(m)?),
                (stored, None) => stored,
            }
        }
        None => {
            let dim = dimension(cfg)?;
            let spec = kernel_spec(cfg, dim)?;
            let n = cfg
                .n
                .ok_or_else(|| CliError::Usage("set `n` or `expansion`".into()))?;
            if dim == 1 {
                let kl = KlExpansion::build(&spec, interval(cfg, spec.family())?, n)?;
                StoredExpansion::from(kl.truncate(cfg.m.unwrap_or(n))?)
            } else {
                let ny = cfg.n_y.unwrap_or(n);
                let kl = KlExpansion2d::from_spec(&spec, rectangle(cfg)?, n, ny)?;
                StoredExpansion::from(kl.truncate(cfg.m.unwrap_or(n * ny))?)
            }
        }
    };
    let build_time = start.elapsed().as_secs_f64();
    let predictions = table_path(&cfg.predictions, "predictions", format);
    match stored {
        StoredExpansion::OneD(kl) => {
            let dataset = read_dataset::<f64>(&data_path, noise)?;
            let queries = match &cfg.queries {
                Some(path) => read_queries::<f64>(path)?,
                None => equispaced(kl.domain(), cfg.grid.unwrap_or(101)),
            };
            fit_and_write(&kl, &dataset, &queries, format, predictions, build_time)
        }
        StoredExpansion::TwoD(kl) => {
            let dataset = read_dataset::<[f64; 2]>(&data_path, noise)?;
            let queries = match &cfg.queries {
                Some(path) => read_queries::<[f64; 2]>(path)?,
                None => {
                    let count = cfg.grid.unwrap_or(41);
                    let xs = equispaced(kl.domain().x, count);
                    let ys = equispaced(kl.domain().y, count);
                    xs.iter()
                        .flat_map(|&x| ys.iter().map(move |&y| [x, y]))
                        .collect()
                }
            };
            fit_and_write(&kl, &dataset, &queries, format, predictions, build_time)
        }
    }
}

fn fit_and_write<E>(
    expansion: &E,
    dataset: &Dataset<E::Point>,
    queries: &[E::Point],
    format: TableFormat,
    path: PathBuf,
    build_time: f64,
) -> Result<(), CliError>
where
    E: BasisExpansion,
    E::Point: TablePoint,
{
    let start = Instant::now();
    let design = DesignMatrix::new(expansion, dataset.inputs())?;
    let summary = ridge_fit(&design, dataset)?;
    let fit_time = start.elapsed().as_secs_f64();
    let fitted = predict_many(expansion, &summary, dataset.inputs())?;
    let rms = (fitted
        .iter()
        .zip(dataset.targets())
        .map(|(p, y)| (p.mean - y).powi(2))
        .sum::<f64>()
        / dataset.len() as f64)
        .sqrt();
    let start = Instant::now();
    let predictions = predict_many(expansion, &summary, queries)?;
    let predict_time = start.elapsed().as_secs_f64();

    let mut header: Vec<&str> = E::Point::COLUMNS.to_vec();
    header.extend(["mean", "latent_variance", "predictive_variance"]);
    let rows: Vec<Vec<String>> = queries
        .iter()
        .zip(&predictions)
        .map(|(q, p)| {
            let mut row = q.fields();
            row.extend([
                float(p.mean),
                float(p.latent_variance),
                float(p.predictive_variance),
            ]);
            row
        })
        .collect();
    let mut outputs = Outputs::default();
    outputs.add(path, render_table(format, &header, &rows)?);
    let written = outputs.commit()?;
    println!(
        "N = {}, m = {}, residual RMS {:.6e}, log evidence {:.6e}",
        dataset.len(),
        expansion.rank(),
        rms,
        summary.log_evidence()
    );
    println!("build {build_time:.3} s, fit {fit_time:.3} s, predict {predict_time:.3} s");
    report_written(&written);
    Ok(())
}

fn axis(
    nodes: Option<usize>,
    pinned: Option<f64>,
    name: &str,
    default: AxisGrid,
) -> Result<AxisGrid, CliError> {
    match (nodes, pinned) {
        (Some(_), Some(_)) => Err(CliError::Usage(format!(
            "give either `{name}_nodes` or `{name}`, not both"
        ))),
        (Some(n), None) => Ok(AxisGrid::Quadrature(n)),
        (None, Some(v)) => Ok(AxisGrid::Pinned(v)),
        (None, None) => Ok(default),
    }
}

pub fn bayes(cfg: &RunConfig) -> Result<(), CliError> {
    let family = kernel_family(cfg)?;
    let domain = interval(cfg, family)?;
    let order = cfg.n.unwrap_or(140);
    let format = TableFormat::parse(cfg.format.as_deref())?;
    let data_path = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("set `data` to a CSV file".into()))?;
    let defaults = PriorSpec::default();
    let prior = PriorSpec::new(
        cfg.alpha_scale.unwrap_or(defaults.alpha_scale),
        cfg.sigma_scale.unwrap_or(defaults.sigma_scale),
        (
            cfg.lengthscale_lo.unwrap_or(defaults.lengthscale.0),
            cfg.lengthscale_hi.unwrap_or(defaults.lengthscale.1),
        ),
    )?;
    let base = BayesGrid::default();
    let grid = BayesGrid {
        lengthscale_nodes: cfg.lengthscale_nodes.unwrap_or(base.lengthscale_nodes),
        alpha: axis(cfg.alpha_nodes, cfg.alpha, "alpha", base.alpha)?,
        sigma: axis(cfg.sigma_nodes, cfg.sigma, "sigma", base.sigma)?,
        scan_nodes: cfg.scan_nodes.unwrap_or(base.scan_nodes),
        truncation: cfg.truncation.unwrap_or(base.truncation),
    };
    let fitter = BayesFitter::new(family, domain, order)?
        .with_prior(prior)?
        .with_grid(grid)?;
    // The noise level is inferred; the dataset's own value is not used.
    let dataset = read_dataset::<f64>(&data_path, 1.0)?;

    let start = Instant::now();
    let posterior = fitter.fit(&dataset)?;
    let elapsed = start.elapsed().as_secs_f64();

    let moments = [
        ("alpha", posterior.alpha),
        ("sigma", posterior.sigma),
        ("lengthscale", posterior.lengthscale),
    ];
    let mut report = String::new();
    let _ = writeln!(report, "kernel: {}", family.name());
    if let KernelFamily::Matern(s) = family {
        let _ = writeln!(report, "nu: {}", s.nu());
    }
    let _ = writeln!(report, "domain: {domain}");
    let _ = writeln!(report, "order: {order}");
    let _ = writeln!(report, "observations: {}", dataset.len());
    let _ = writeln!(
        report,
        "prior: alpha ~ half-normal({}), sigma ~ half-normal({}), lengthscale ~ uniform({}, {})",
        prior.alpha_scale, prior.sigma_scale, prior.lengthscale.0, prior.lengthscale.1
    );
    let _ = writeln!(report, "log evidence: {}", float(posterior.log_normalizer));
    for (name, m) in &moments {
        let _ = writeln!(
            report,
            "{name}: mean {} sd {}",
            float(m.mean),
            float(m.sd())
        );
    }
    let _ = writeln!(
        report,
        "mean function: {} ordinary Legendre coefficients on {domain}",
        posterior.mean_function.coefficients().len()
    );
    let _ = writeln!(report, "lengthscale nodes (lengthscale, weight, log mass):");
    for s in &posterior.slices {
        let _ = writeln!(
            report,
            "  {} {} {}",
            float(s.lengthscale),
            float(s.weight),
            float(s.log_mass)
        );
    }

    let moment_rows: Vec<Vec<String>> = moments
        .iter()
        .map(|(name, m)| vec![name.to_string(), float(m.mean), float(m.sd())])
        .collect();
    let series_rows: Vec<Vec<String>> = posterior
        .mean_function
        .coefficients()
        .iter()
        .enumerate()
        .map(|(i, c)| vec![i.to_string(), float(*c)])
        .collect();
    let mut outputs = Outputs::default();
    outputs.add(
        cfg.report
            .clone()
            .unwrap_or_else(|| PathBuf::from("bayes_report.txt")),
        report,
    );
    outputs.add(
        table_path(&cfg.moments, "bayes_moments", format),
        render_table(format, &["parameter", "mean", "sd"], &moment_rows)?,
    );
    outputs.add(
        table_path(&cfg.series, "bayes_series", format),
        render_table(format, &["degree", "coefficient"], &series_rows)?,
    );
    let written = outputs.commit()?;
    for (name, m) in &moments {
        println!("{name}: mean {:.6} sd {:.6}", m.mean, m.sd());
    }
    println!(
        "N = {}, n = {order}, inference {elapsed:.3} s",
        dataset.len()
    );
    report_written(&written);
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let format = TableFormat::parse(cfg.format.as_deref())?;
    let count = cfg.count.unwrap_or(100);
    let noise = cfg.noise.unwrap_or(0.1);
    let seed = cfg.seed.unwrap_or(0);
    if count == 0 {
        return Err(CliError::Usage("count must be positive".into()));
    }
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) =
        match cfg.function.as_deref().unwrap_or("cos-exp") {
            "cos-exp" => {
                let data = cos_exp_dataset(count, noise, seed)?;
                let rows = data
                    .inputs()
                    .iter()
                    .zip(data.targets())
                    .map(|(x, y)| vec![float(*x), float(*y)])
                    .collect();
                (vec!["x", "y"], rows)
            }
            "plane-sine" => {
                let data = plane_sine_dataset(count, noise, seed)?;
                let rows = data
                    .inputs()
                    .iter()
                    .zip(data.targets())
                    .map(|(p, y)| vec![float(p[0]), float(p[1]), float(*y)])
                    .collect();
                (vec!["x1", "x2", "y"], rows)
            }
            other => {
                return Err(CliError::Usage(format!(
                    "function must be cos-exp or plane-sine, got {other:?}"
                )))
            }
        };
    let mut outputs = Outputs::default();
    outputs.add(
        table_path(&cfg.output, "synthetic", format),
        render_table(format, &header, &rows)?,
    );
    report_written(&outputs.commit()?);
    Ok(())
}
