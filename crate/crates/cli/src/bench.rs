//! Benchmark suites. Each row is computed independently and the rows run
//! in parallel; output order is fixed by the row list, so files differ
//! between runs only in the `seconds` column.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use klgp::diagnostics::proxy_with;
use klgp::synthetic::cos_exp_dataset;
use klgp::{
    effective_kernel_error, effective_kernel_error_2d, BasisExpansion, BayesFitter, BayesGrid,
    BayesPosterior, Interval, KernelFamily, KernelSpec, KlExpansion, KlExpansion2d, Rectangle,
    Smoothness,
};

use crate::config::RunConfig;
use crate::io::{float, render_table, Outputs, TableFormat};
use crate::CliError;

pub const SUITES: &[&str] = &["se-1d", "matern-1d", "alg1-vs-alg3", "se-2d", "bayes"];

/// Relative tolerance of every measured kernel error.
const EPS_TOL: f64 = 1e-4;

/// One computed row plus its wall time.
type Row = (Vec<String>, f64);

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let suite = cfg
        .suite
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("name a suite: {}", SUITES.join(", "))))?;
    let format = TableFormat::parse(cfg.format.as_deref())?;
    let timing = cfg.timing.unwrap_or(true);
    if cfg.sizes.is_some() && suite != "bayes" {
        return Err(CliError::Usage(
            "`sizes` applies to the bayes suite only".into(),
        ));
    }
    let (header, rows): (Vec<&str>, Vec<Row>) = match suite {
        "se-1d" => (
            vec!["n", "m", "delta_max", "tail", "eps"],
            parallel_rows((5..=50).step_by(5).collect(), |n| {
                let spec = KernelSpec::squared_exponential(1.0, 0.2, 1)?;
                error_row(&spec, n, false)
            })?,
        ),
        "matern-1d" => (
            vec!["n", "m", "delta_max", "tail", "eps"],
            parallel_rows((10..=55).step_by(5).collect(), |n| {
                let spec = KernelSpec::matern(1.5, 1.0, 0.2, 1)?;
                error_row(&spec, n, true)
            })?,
        ),
        "alg1-vs-alg3" => alg1_vs_alg3()?,
        "se-2d" => (
            vec!["n", "m", "eps"],
            parallel_rows(vec![10, 12, 15, 17, 20], |n| {
                let spec = KernelSpec::squared_exponential(1.0, 0.25, 2)?;
                let kl = KlExpansion2d::from_spec(&spec, Rectangle::reference(), n, n)?;
                let eps = effective_kernel_error_2d(|p, q| spec.eval2(p, q), &kl)?;
                Ok(vec![n.to_string(), kl.rank().to_string(), float(eps)])
            })?,
        ),
        "bayes" => bayes_rows(cfg.sizes.clone().unwrap_or_else(|| vec![10, 100, 1000]))?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown suite {other:?} (available: {})",
                SUITES.join(", ")
            )))
        }
    };

    let mut header = header;
    if timing {
        header.push("seconds");
    }
    let table: Vec<Vec<String>> = rows
        .into_iter()
        .map(|(mut row, seconds)| {
            if timing {
                row.push(format!("{seconds:.3}"));
            }
            row
        })
        .collect();
    let text = render_table(format, &header, &table)?;
    let path = cfg.output.clone().unwrap_or_else(|| {
        PathBuf::from(match format {
            TableFormat::Csv => format!("bench-{suite}.csv"),
            TableFormat::Tsv => format!("bench-{suite}.tsv"),
        })
    });
    print!("{text}");
    let mut outputs = Outputs::default();
    outputs.add(path, text);
    for p in outputs.commit()? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn parallel_rows<F>(params: Vec<usize>, row: F) -> Result<Vec<Row>, CliError>
where
    F: Fn(usize) -> klgp::Result<Vec<String>> + Sync,
{
    params
        .into_par_iter()
        .map(|p| {
            let start = Instant::now();
            let cells = row(p)?;
            Ok((cells, start.elapsed().as_secs_f64()))
        })
        .collect()
}

/// Full-rank (`m = n`) proxy and measured error on `[-1, 1]`. `nystrom`
/// forces the smooth path even for a rough kernel.
fn error_row(spec: &KernelSpec<f64>, n: usize, nystrom: bool) -> klgp::Result<Vec<String>> {
    let domain = Interval::reference();
    let kernel = |x, y| spec.eval1(x, y);
    let builder = |order| {
        if nystrom {
            KlExpansion::build_smooth(kernel, domain, order)
        } else {
            KlExpansion::build(spec, domain, order)
        }
    };
    let report = proxy_with(builder, n, n)?;
    let kl = builder(n)?;
    let eps = effective_kernel_error(kernel, &kl, EPS_TOL)?;
    Ok(vec![
        n.to_string(),
        n.to_string(),
        float(report.delta_max),
        float(report.tail),
        float(eps),
    ])
}

/// Index of the compared eigenvalue (1-based).
const COMPARED: usize = 20;
/// Split-panel order of the reference eigenvalue.
const REFERENCE_ORDER: usize = 240;

fn alg1_vs_alg3() -> Result<(Vec<&'static str>, Vec<Row>), CliError> {
    let domain = Interval::reference();
    let mut cases = Vec::new();
    for nu in [0.5, 2.5] {
        for n in (20..=160).step_by(20) {
            cases.push((nu, n));
        }
    }
    let references: Vec<f64> = [0.5, 2.5]
        .par_iter()
        .map(|&nu| {
            let spec = KernelSpec::matern(nu, 1.0, 0.2, 1)?;
            let kl =
                KlExpansion::build_nonsmooth(|x, y| spec.eval1(x, y), domain, REFERENCE_ORDER)?;
            Ok(kl.spectrum()[COMPARED - 1])
        })
        .collect::<klgp::Result<_>>()?;
    let rows = cases
        .into_par_iter()
        .map(|(nu, n)| {
            let start = Instant::now();
            let spec = KernelSpec::matern(nu, 1.0, 0.2, 1)?;
            let kernel = |x, y| spec.eval1(x, y);
            let smooth = KlExpansion::build_smooth(kernel, domain, n)?.spectrum()[COMPARED - 1];
            let split = KlExpansion::build_nonsmooth(kernel, domain, n)?.spectrum()[COMPARED - 1];
            let reference = references[usize::from(nu > 1.0)];
            let cells = vec![
                float(nu),
                n.to_string(),
                float(smooth),
                float(split),
                float((smooth - reference).abs()),
                float((split - reference).abs()),
            ];
            Ok((cells, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<Row>, CliError>>()?;
    let header = vec![
        "nu",
        "n",
        "lambda20_smooth",
        "lambda20_split",
        "error_smooth",
        "error_split",
    ];
    Ok((header, rows))
}

const MATERN_32: KernelFamily = KernelFamily::Matern(Smoothness::ThreeHalves);

/// Posterior moments of the Matérn 3/2 model on the cos-exp data,
/// and the largest moment change when every grid is doubled.
fn bayes_rows(sizes: Vec<usize>) -> Result<(Vec<&'static str>, Vec<Row>), CliError> {
    if sizes.is_empty() {
        return Err(CliError::Usage("`sizes` must not be empty".into()));
    }
    let fitter = BayesFitter::new(MATERN_32, Interval::reference(), 140)?;
    let fine = BayesFitter::new(MATERN_32, Interval::reference(), 140)?
        .with_grid(BayesGrid::default().doubled())?;
    let mut rows = Vec::with_capacity(sizes.len());
    // The fits are internally parallel, so sizes run one after another.
    for size in sizes {
        let data = cos_exp_dataset(size, 0.1, 1)?;
        let start = Instant::now();
        let post = fitter.fit(&data)?;
        let seconds = start.elapsed().as_secs_f64();
        let doubled = fine.fit(&data)?;
        let mut cells = vec![size.to_string()];
        for m in [post.alpha, post.sigma, post.lengthscale] {
            cells.push(float(m.mean));
            cells.push(float(m.sd()));
        }
        cells.push(float(max_change(&post, &doubled)));
        rows.push((cells, seconds));
    }
    let header = vec![
        "N",
        "alpha_mean",
        "alpha_sd",
        "sigma_mean",
        "sigma_sd",
        "lengthscale_mean",
        "lengthscale_sd",
        "max_change",
    ];
    Ok((header, rows))
}

fn max_change(a: &BayesPosterior, b: &BayesPosterior) -> f64 {
    [
        (a.alpha, b.alpha),
        (a.sigma, b.sigma),
        (a.lengthscale, b.lengthscale),
    ]
    .iter()
    .flat_map(|(x, y)| [(x.mean - y.mean).abs(), (x.sd() - y.sd()).abs()])
    .fold(0.0, f64::max)
}
