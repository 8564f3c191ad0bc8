//! Run configuration: a flat TOML file of `key = value` lines, with
//! `--set key=value` overrides applied on top.
//!
//! Every command accepts a fixed set of keys and rejects any other key
//! before computing anything. The full schema:
//!
//! | key | type | used by | meaning |
//! |---|---|---|---|
//! | `kernel` | string | kl-build, fit-predict, bayes | `se`, `matern`, `constant` or `brownian` |
//! | `nu` | float | same | Matérn smoothness: 0.5, 1.5 or 2.5 |
//! | `amplitude` | float | kl-build, fit-predict | kernel amplitude (default 1) |
//! | `lengthscale` | float | kl-build, fit-predict | kernel lengthscale |
//! | `dimension` | int | kl-build, fit-predict | 1 or 2 (default 1) |
//! | `domain` | float array | kl-build, fit-predict, bayes | `[lo, hi]` or `[xlo, xhi, ylo, yhi]` |
//! | `n` | int | kl-build, fit-predict, bayes | quadrature order (per axis in 2D) |
//! | `n_y` | int | kl-build, fit-predict | order along the second axis (default `n`) |
//! | `m` | int | kl-build, fit-predict | retained basis functions (default all) |
//! | `target` | float | kl-build | pick `n` and `m` automatically for this kernel error (1D) |
//! | `expansion` | path | kl-build (output), fit-predict (input) | KLGP1 expansion file |
//! | `eigenvalues` | path | kl-build | eigenvalue table |
//! | `data` | path | fit-predict, bayes | dataset CSV with header `x,y` or `x1,x2,y` |
//! | `noise` | float | fit-predict, synth | observation noise standard deviation |
//! | `queries` | path | fit-predict | query CSV with header `x` or `x1,x2` |
//! | `grid` | int | fit-predict | equispaced query points per axis when `queries` is absent |
//! | `predictions` | path | fit-predict | prediction table |
//! | `alpha_scale`, `sigma_scale` | float | bayes | half-normal prior scales (default 3) |
//! | `lengthscale_lo`, `lengthscale_hi` | float | bayes | uniform lengthscale prior (default 0.02, 1) |
//! | `lengthscale_nodes` | int | bayes | Gauss nodes over the lengthscale prior (default 32) |
//! | `alpha_nodes`, `sigma_nodes` | int | bayes | Gauss nodes per axis (default 40) |
//! | `alpha`, `sigma` | float | bayes | pin the hyperparameter at this value |
//! | `scan_nodes` | int | bayes | coarse scan nodes per axis (default 24) |
//! | `truncation` | float | bayes | upper cut of the `α`, `σ` axes in prior scales (default 6) |
//! | `report`, `moments`, `series` | path | bayes | text report, moment table, mean-function coefficients |
//! | `suite` | string | bench | `se-1d`, `matern-1d`, `alg1-vs-alg3`, `se-2d` or `bayes` |
//! | `sizes` | int array | bench | dataset sizes of the `bayes` suite (default `[10, 100, 1000]`) |
//! | `timing` | bool | bench | include the wall-time column (default true) |
//! | `function` | string | synth | `cos-exp` or `plane-sine` |
//! | `count` | int | synth | number of observations |
//! | `seed` | int | synth | random seed (default 0) |
//! | `output` | path | bench, synth | output table |
//! | `format` | string | all tables | `csv` (default) or `tsv` |

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Option<String>,
    pub nu: Option<f64>,
    pub amplitude: Option<f64>,
    pub lengthscale: Option<f64>,
    pub dimension: Option<usize>,
    pub domain: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub n_y: Option<usize>,
    pub m: Option<usize>,
    pub target: Option<f64>,
    pub expansion: Option<PathBuf>,
    pub eigenvalues: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub noise: Option<f64>,
    pub queries: Option<PathBuf>,
    pub grid: Option<usize>,
    pub predictions: Option<PathBuf>,
    pub alpha_scale: Option<f64>,
    pub sigma_scale: Option<f64>,
    pub lengthscale_lo: Option<f64>,
    pub lengthscale_hi: Option<f64>,
    pub lengthscale_nodes: Option<usize>,
    pub alpha_nodes: Option<usize>,
    pub sigma_nodes: Option<usize>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub scan_nodes: Option<usize>,
    pub truncation: Option<f64>,
    pub report: Option<PathBuf>,
    pub moments: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub suite: Option<String>,
    pub sizes: Option<Vec<usize>>,
    pub timing: Option<bool>,
    pub function: Option<String>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
}

/// Keys each command accepts.
pub fn allowed_keys(command: &str) -> &'static [&'static str] {
    match command {
        "kl-build" => &[
            "kernel",
            "nu",
            "amplitude",
            "lengthscale",
            "dimension",
            "domain",
            "n",
            "n_y",
            "m",
            "target",
            "expansion",
            "eigenvalues",
            "format",
        ],
        "fit-predict" => &[
            "kernel",
            "nu",
            "amplitude",
            "lengthscale",
            "dimension",
            "domain",
            "n",
            "n_y",
            "m",
            "expansion",
            "data",
            "noise",
            "queries",
            "grid",
            "predictions",
            "format",
        ],
        "bayes" => &[
            "kernel",
            "nu",
            "domain",
            "n",
            "data",
            "alpha_scale",
            "sigma_scale",
            "lengthscale_lo",
            "lengthscale_hi",
            "lengthscale_nodes",
            "alpha_nodes",
            "sigma_nodes",
            "alpha",
            "sigma",
            "scan_nodes",
            "truncation",
            "report",
            "moments",
            "series",
            "format",
        ],
        "bench" => &["suite", "sizes", "timing", "output", "format"],
        "synth" => &["function", "count", "noise", "seed", "output", "format"],
        _ => &[],
    }
}

/// Reads the optional config file, applies overrides and validates the keys
/// against `command`.
pub fn load(
    command: &str,
    file: Option<&Path>,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let mut table = match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            text.parse::<Table>()
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
        }
        None => Table::new(),
    };
    for item in overrides {
        let (key, value) = parse_override(item)?;
        table.insert(key, value);
    }
    let allowed = allowed_keys(command);
    for (key, value) in &table {
        if matches!(value, Value::Table(_)) {
            return Err(CliError::Usage(format!(
                "key {key:?}: nested tables are not supported"
            )));
        }
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown key {key:?} for {command} (accepted: {})",
                allowed.join(", ")
            )));
        }
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))
}

/// `key=value`, where `value` is read as a TOML value and falls back to a
/// bare string (so `--set data=runs/a.csv` needs no quotes).
fn parse_override(item: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {item:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(CliError::Usage(format!(
            "override {item:?} has an invalid key"
        )));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}
