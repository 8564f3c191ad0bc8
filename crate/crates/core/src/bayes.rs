//! Posterior moments of the hyperparameters `(α, σ, ℓ)` with the basis
//! coefficients `β` integrated out analytically.
//!
//! The model is `y = Xβ + ε`, `β ~ N(0, αI)`, `ε ~ N(0, σ²I)`, where `X`
//! holds the KL basis of a unit-amplitude kernel with lengthscale `ℓ`.
//! Priors: `α ~ N⁺(0, s_α)`, `σ ~ N⁺(0, s_σ)` (half-normal with scale `s`),
//! `ℓ ~ U(ℓ_lo, ℓ_hi)`.
//!
//! The lengthscale is integrated with Gauss-Legendre nodes on the prior
//! interval, one KL expansion per node. For each `ℓ` the evidence
//! `p(y | ℓ, α, σ)` is available in closed form from the SVD of `X`, and the
//! `(α, σ)` integral runs in log coordinates on a tensor Gauss grid. With
//! thousands of observations the `(α, σ)` posterior is far narrower than the
//! prior, so a grid spread over the whole prior support would miss it. The
//! grid is instead placed on a box around the posterior mode: a coarse scan
//! locates it, Newton iterations refine it, and the box spans ten standard
//! deviations of the local Gaussian approximation on each side, clipped to
//! the truncated prior support.
//!
//! Every sum over grid points is accumulated in log space against a running
//! maximum, so no posterior mass underflows.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::kl1d::KlExpansion;
use crate::linalg;
use crate::quadrature::{legendre_table, Basis, GaussRule, Interval, LegendreSeries};
use crate::regression::{log_evidence, Dataset, SpectralData};

/// Lower end of each `(α, σ)` axis, as a fraction of the prior scale.
const LOWER_FRACTION: f64 = 1e-6;
/// Half-width of the integration box in local standard deviations.
const BOX_HALF_WIDTH_SD: f64 = 10.0;
/// Log-density drop that delimits the fallback box.
const FALLBACK_DROP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub alpha_scale: f64,
    pub sigma_scale: f64,
    pub lengthscale: (f64, f64),
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            alpha_scale: 3.0,
            sigma_scale: 3.0,
            lengthscale: (0.02, 1.0),
        }
    }
}

impl PriorSpec {
    pub fn new(alpha_scale: f64, sigma_scale: f64, lengthscale: (f64, f64)) -> Result<Self> {
        let spec = Self {
            alpha_scale,
            sigma_scale,
            lengthscale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_scale > 0.0 && self.sigma_scale > 0.0) {
            return Err(Error::contract("prior scales must be positive"));
        }
        let (lo, hi) = self.lengthscale;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::contract(format!(
                "lengthscale prior needs 0 < lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// `log` of the half-normal density with scale `s` at `x > 0`.
fn log_half_normal(x: f64, s: f64) -> f64 {
    (2.0 / (s * (2.0 * std::f64::consts::PI).sqrt())).ln() - 0.5 * (x / s).powi(2)
}

/// How one of the `(α, σ)` axes is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisGrid {
    /// Gauss-Legendre nodes (in log coordinates) on the adaptive box.
    Quadrature(usize),
    /// The hyperparameter is fixed at this value (a point-mass prior).
    Pinned(f64),
}

impl AxisGrid {
    fn doubled(self) -> Self {
        match self {
            AxisGrid::Quadrature(n) => AxisGrid::Quadrature(2 * n),
            pinned => pinned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesGrid {
    /// Gauss nodes over the lengthscale prior interval.
    pub lengthscale_nodes: usize,
    pub alpha: AxisGrid,
    pub sigma: AxisGrid,
    /// Per-axis nodes of the coarse scan that locates the `(α, σ)` mode.
    pub scan_nodes: usize,
    /// Upper truncation of the `α` and `σ` axes in prior scales.
    pub truncation: f64,
}

impl Default for BayesGrid {
    fn default() -> Self {
        Self {
            lengthscale_nodes: 32,
            alpha: AxisGrid::Quadrature(40),
            sigma: AxisGrid::Quadrature(40),
            scan_nodes: 24,
            truncation: 6.0,
        }
    }
}

impl BayesGrid {
    /// Every grid with twice as many nodes per axis.
    pub fn doubled(&self) -> Self {
        Self {
            lengthscale_nodes: 2 * self.lengthscale_nodes,
            alpha: self.alpha.doubled(),
            sigma: self.sigma.doubled(),
            scan_nodes: 2 * self.scan_nodes,
            truncation: self.truncation,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lengthscale_nodes == 0 || self.scan_nodes < 2 {
            return Err(Error::contract("grid node counts must be positive"));
        }
        for axis in [self.alpha, self.sigma] {
            match axis {
                AxisGrid::Quadrature(0) => {
                    return Err(Error::contract("grid node counts must be positive"))
                }
                AxisGrid::Pinned(v) if !(v > 0.0 && v.is_finite()) => {
                    return Err(Error::contract(format!(
                        "pinned value must be positive, got {v}"
                    )))
                }
                _ => {}
            }
        }
        if !(self.truncation > 0.0) {
            return Err(Error::contract("truncation must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Contribution of one lengthscale node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthscaleSlice {
    pub lengthscale: f64,
    /// Normalized mixture weight.
    pub weight: f64,
    /// `log ∫∫ p(y | ℓ, α, σ) p(α) p(σ) dα dσ`.
    pub log_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesPosterior {
    /// `log p(y)` under the truncated priors.
    pub log_normalizer: f64,
    pub alpha: Moments,
    pub sigma: Moments,
    pub lengthscale: Moments,
    /// Posterior mean of `f` as a Legendre series on the fit domain.
    pub mean_function: LegendreSeries<f64>,
    pub slices: Vec<LengthscaleSlice>,
}

/// Runs the quadrature marginalization for one kernel family.
///
/// Every lengthscale node uses the same KL order so the posterior mean
/// functions share a Legendre basis and can be mixed coefficient-wise.
/// Expansions are cached by lengthscale, so repeated fits on new data
/// reuse them.
#[derive(Debug)]
pub struct BayesFitter {
    family: KernelFamily,
    domain: Interval<f64>,
    order: usize,
    prior: PriorSpec,
    grid: BayesGrid,
    cache: Option<Mutex<HashMap<u64, Arc<KlExpansion>>>>,
}

impl BayesFitter {
    pub fn new(family: KernelFamily, domain: Interval<f64>, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::contract(format!(
                "KL order must be >= 2, got {order}"
            )));
        }
        if matches!(family, KernelFamily::Brownian) && domain.lo() < 0.0 {
            return Err(Error::contract(
                "the Brownian kernel needs a non-negative domain",
            ));
        }
        Ok(Self {
            family,
            domain,
            order,
            prior: PriorSpec::default(),
            grid: BayesGrid::default(),
            cache: Some(Mutex::new(HashMap::new())),
        })
    }

    pub fn with_prior(mut self, prior: PriorSpec) -> Result<Self> {
        prior.validate()?;
        self.prior = prior;
        Ok(self)
    }

    pub fn with_grid(mut self, grid: BayesGrid) -> Result<Self> {
        grid.validate()?;
        self.grid = grid;
        Ok(self)
    }

    /// Turns expansion caching on or off.
    pub fn with_cache(mut self, enabled: bool) -> Self {
        self.cache = enabled.then(|| Mutex::new(HashMap::new()));
        self
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn grid(&self) -> &BayesGrid {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cached_expansions(&self) -> usize {
        self.cache
            .as_ref()
            .map_or(0, |c| c.lock().expect("cache lock").len())
    }

    /// Unit-amplitude expansion at lengthscale `ell`, built or cached.
    pub fn expansion(&self, ell: f64) -> Result<Arc<KlExpansion>> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().expect("cache lock").get(&ell.to_bits()) {
                return Ok(Arc::clone(hit));
            }
        }
        let spec = KernelSpec::new(self.family, 1.0, ell, 1)?;
        let built = Arc::new(KlExpansion::build(&spec, self.domain, self.order)?);
        if let Some(cache) = &self.cache {
            cache
                .lock()
                .expect("cache lock")
                .insert(ell.to_bits(), Arc::clone(&built));
        }
        Ok(built)
    }

    /// Lengthscale nodes and weights of the outer rule.
    pub fn lengthscale_rule(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.prior.lengthscale;
        Ok(GaussRule::<f64>::new(self.grid.lengthscale_nodes)?.mapped(&Interval::new(lo, hi)?))
    }

    pub fn fit(&self, data: &Dataset<f64>) -> Result<BayesPosterior> {
        if let Some((row, x)) = data
            .inputs()
            .iter()
            .enumerate()
            .find(|(_, x)| !self.domain.contains(**x))
        {
            return Err(Error::RowOutsideDomain {
                row: row + 1,
                point: format!("{x}"),
                domain: self.domain.to_string(),
            });
        }
        let projection = Projection::new(data, self.domain, self.order)?;
        let (ells, weights) = self.lengthscale_rule()?;
        let (lo, hi) = self.prior.lengthscale;
        let log_prior_ell = -(hi - lo).ln();

        let slices: Vec<SliceResult> = ells
            .par_iter()
            .map(|&ell| {
                let kl = self.expansion(ell)?;
                self.integrate_slice(&kl, &projection)
            })
            .collect::<Result<_>>()?;

        let log_terms: Vec<f64> = slices
            .iter()
            .zip(&weights)
            .map(|(s, w)| s.log_mass + w.ln() + log_prior_ell)
            .collect();
        let (log_normalizer, mix) = normalize(&log_terms)?;

        let mut coefficients = vec![0.0; self.order];
        let (mut a1, mut a2, mut s1, mut s2, mut l1, mut l2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for ((slice, &pi), &ell) in slices.iter().zip(&mix).zip(&ells) {
            a1 += pi * slice.alpha.0;
            a2 += pi * slice.alpha.1;
            s1 += pi * slice.sigma.0;
            s2 += pi * slice.sigma.1;
            l1 += pi * ell;
            l2 += pi * ell * ell;
            for (c, v) in coefficients.iter_mut().zip(&slice.mean_coefficients) {
                *c += pi * v;
            }
        }
        let moments = |m1: f64, m2: f64| Moments {
            mean: m1,
            variance: (m2 - m1 * m1).max(0.0),
        };
        Ok(BayesPosterior {
            log_normalizer,
            alpha: moments(a1, a2),
            sigma: moments(s1, s2),
            lengthscale: moments(l1, l2),
            mean_function: LegendreSeries::new(coefficients, Basis::Ordinary, self.domain),
            slices: slices
                .iter()
                .zip(&mix)
                .zip(&ells)
                .map(|((s, &weight), &lengthscale)| LengthscaleSlice {
                    lengthscale,
                    weight,
                    log_mass: s.log_mass,
                })
                .collect(),
        })
    }

    fn integrate_slice(&self, kl: &KlExpansion, projection: &Projection) -> Result<SliceResult> {
        let spectral = projection.spectral(kl)?;
        let prior = &self.prior;
        let axes = [
            Axis::new(self.grid.alpha, prior.alpha_scale, self.grid.truncation),
            Axis::new(self.grid.sigma, prior.sigma_scale, self.grid.truncation),
        ];
        let density = |u: [f64; 2]| -> f64 {
            let (alpha, sigma) = (axes[0].value(u[0]), axes[1].value(u[1]));
            let mut total = match log_evidence(&spectral.data, alpha, sigma) {
                Ok(v) => v,
                Err(_) => return f64::NEG_INFINITY,
            };
            for (axis, (&ui, x)) in axes.iter().zip(u.iter().zip([alpha, sigma])) {
                if let Some(scale) = axis.scale {
                    // Density in log coordinates carries the Jacobian x = e^u.
                    total += log_half_normal(x, scale) + ui;
                }
            }
            total
        };
        let boxes = locate_box(&axes, self.grid.scan_nodes, &density)?;

        let rules: Vec<(Vec<f64>, Vec<f64>)> = axes
            .iter()
            .zip(&boxes)
            .map(|(axis, &(lo, hi))| match axis.grid {
                AxisGrid::Pinned(_) => Ok((vec![0.0], vec![1.0])),
                AxisGrid::Quadrature(n) => {
                    Ok(GaussRule::<f64>::new(n)?.mapped(&Interval::new(lo, hi)?))
                }
            })
            .collect::<Result<_>>()?;

        let mut points = Vec::with_capacity(rules[0].0.len() * rules[1].0.len());
        for (&u0, &w0) in rules[0].0.iter().zip(&rules[0].1) {
            for (&u1, &w1) in rules[1].0.iter().zip(&rules[1].1) {
                points.push(([u0, u1], density([u0, u1]) + (w0 * w1).ln()));
            }
        }
        let logs: Vec<f64> = points.iter().map(|p| p.1).collect();
        let (log_mass, probs) = normalize(&logs)?;

        // E[β | ℓ, y] = V diag(E[α / (α d² + σ²)] d z).
        let d = &spectral.data.singular;
        let mut shrink = vec![0.0; d.len()];
        let (mut a1, mut a2, mut s1, mut s2) = (0.0, 0.0, 0.0, 0.0);
        for ((u, _), &p) in points.iter().zip(&probs) {
            let (alpha, sigma) = (axes[0].value(u[0]), axes[1].value(u[1]));
            a1 += p * alpha;
            a2 += p * alpha * alpha;
            s1 += p * sigma;
            s2 += p * sigma * sigma;
            for (h, &dk) in shrink.iter_mut().zip(d) {
                *h += p * alpha / (alpha * dk * dk + sigma * sigma);
            }
        }
        let g = DVector::from_iterator(
            d.len(),
            shrink
                .iter()
                .zip(d)
                .zip(&spectral.data.projected)
                .map(|((h, dk), zk)| h * dk * zk),
        );
        let beta = &spectral.v * g;
        Ok(SliceResult {
            log_mass,
            alpha: (a1, a2),
            sigma: (s1, s2),
            mean_coefficients: kl.combine(beta.as_slice())?,
        })
    }
}

struct SliceResult {
    log_mass: f64,
    /// First and second moments under the conditional posterior.
    alpha: (f64, f64),
    sigma: (f64, f64),
    mean_coefficients: Vec<f64>,
}

/// Log-sum-exp normalization: returns `log Σ e^{t_i}` and the weights `e^{t_i}/Σ`.
fn normalize(log_terms: &[f64]) -> Result<(f64, Vec<f64>)> {
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Underflow(format!(
            "all {} log masses are non-finite",
            log_terms.len()
        )));
    }
    let scaled: Vec<f64> = log_terms.iter().map(|t| (t - max).exp()).collect();
    let sum: f64 = scaled.iter().sum();
    Ok((max + sum.ln(), scaled.iter().map(|s| s / sum).collect()))
}

/// One `(α, σ)` axis in log coordinates `u = ln x`.
struct Axis {
    grid: AxisGrid,
    /// Prior scale when the axis is integrated; `None` when pinned.
    scale: Option<f64>,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(grid: AxisGrid, scale: f64, truncation: f64) -> Self {
        match grid {
            AxisGrid::Pinned(v) => Self {
                grid,
                scale: None,
                lo: v.ln(),
                hi: v.ln(),
            },
            AxisGrid::Quadrature(_) => Self {
                grid,
                scale: Some(scale),
                lo: (scale * LOWER_FRACTION).ln(),
                hi: (scale * truncation).ln(),
            },
        }
    }

    fn value(&self, u: f64) -> f64 {
        match self.grid {
            AxisGrid::Pinned(v) => v,
            AxisGrid::Quadrature(_) => u.exp(),
        }
    }

    fn free(&self) -> bool {
        self.scale.is_some()
    }
}

/// Integration box `[lo, hi]` per axis (log coordinates) around the mode of
/// `density`.
fn locate_box<F: Fn([f64; 2]) -> f64>(
    axes: &[Axis; 2],
    scan: usize,
    density: &F,
) -> Result<[(f64, f64); 2]> {
    let free: Vec<usize> = (0..2).filter(|&i| axes[i].free()).collect();
    let mut boxes = [(axes[0].lo, axes[0].hi), (axes[1].lo, axes[1].hi)];
    if free.is_empty() {
        return Ok(boxes);
    }

    // Coarse scan on Gauss nodes of each free axis.
    let rule = GaussRule::<f64>::new(scan)?;
    let scan_nodes: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            if axes[i].free() {
                let iv = Interval::new(axes[i].lo, axes[i].hi).expect("ordered axis bounds");
                rule.mapped(&iv).0
            } else {
                vec![axes[i].lo]
            }
        })
        .collect();
    let mut samples = Vec::new();
    for &u0 in &scan_nodes[0] {
        for &u1 in &scan_nodes[1] {
            samples.push(([u0, u1], density([u0, u1])));
        }
    }
    let (mut mode, best) = samples
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty scan");
    if !best.is_finite() {
        return Err(Error::Underflow(
            "posterior density is zero on the whole scan".into(),
        ));
    }

    let clamp = |u: [f64; 2]| {
        let mut out = u;
        for i in 0..2 {
            out[i] = out[i].clamp(axes[i].lo, axes[i].hi);
        }
        out
    };
    let hessian_at = |u: [f64; 2]| -> (DVector<f64>, DMatrix<f64>) {
        let h = 1e-3;
        let k = free.len();
        let f0 = density(u);
        let shift = |u: [f64; 2], i: usize, s: f64| {
            let mut v = u;
            v[free[i]] += s;
            v
        };
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for i in 0..k {
            let fp = density(shift(u, i, h));
            let fm = density(shift(u, i, -h));
            grad[i] = (fp - fm) / (2.0 * h);
            hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in 0..i {
                let fpp = density(shift(shift(u, i, h), j, h));
                let fpm = density(shift(shift(u, i, h), j, -h));
                let fmp = density(shift(shift(u, i, -h), j, h));
                let fmm = density(shift(shift(u, i, -h), j, -h));
                let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        (grad, hess)
    };

    // Damped Newton ascent from the best scan point.
    let mut value = best;
    for _ in 0..100 {
        let (grad, hess) = hessian_at(mode);
        let step = match (-&hess).cholesky() {
            Some(chol) => chol.solve(&grad),
            None => grad.clone() * 0.1,
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-6 {
            let mut trial = mode;
            for (i, &axis) in free.iter().enumerate() {
                trial[axis] += t * step[i];
            }
            let trial = clamp(trial);
            let v = density(trial);
            if v > value {
                let delta = (0..2)
                    .map(|i| (trial[i] - mode[i]).abs())
                    .fold(0.0, f64::max);
                mode = trial;
                value = v;
                moved = delta > 1e-10;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }

    let (_, hess) = hessian_at(mode);
    let covariance = (-&hess).cholesky().map(|c| c.inverse());
    match covariance {
        Some(cov) if cov.iter().all(|v| v.is_finite()) => {
            for (i, &axis) in free.iter().enumerate() {
                let sd = cov[(i, i)].sqrt();
                boxes[axis] = (
                    (mode[axis] - BOX_HALF_WIDTH_SD * sd).max(axes[axis].lo),
                    (mode[axis] + BOX_HALF_WIDTH_SD * sd).min(axes[axis].hi),
                );
            }
        }
        _ => {
            // No usable curvature: keep every scan point within a fixed
            // log-density drop of the maximum, padded by one scan spacing.
            let spacing = |axis: usize| (axes[axis].hi - axes[axis].lo) / scan as f64;
            for &axis in &free {
                let kept = samples
                    .iter()
                    .filter(|s| s.1 >= value - FALLBACK_DROP)
                    .map(|s| s.0[axis]);
                let (lo, hi) = kept.fold((mode[axis], mode[axis]), |(lo, hi), u| {
                    (lo.min(u), hi.max(u))
                });
                boxes[axis] = (
                    (lo - spacing(axis)).max(axes[axis].lo),
                    (hi + spacing(axis)).min(axes[axis].hi),
                );
            }
        }
    }
    for &axis in &free {
        if !(boxes[axis].1 > boxes[axis].0) {
            let pad = 1e-6 * (axes[axis].hi - axes[axis].lo);
            boxes[axis] = (
                (boxes[axis].0 - pad).max(axes[axis].lo),
                (boxes[axis].1 + pad).min(axes[axis].hi),
            );
        }
    }
    Ok(boxes)
}

/// The data side of every design matrix: `X = P S` with `P` the Legendre
/// Vandermonde matrix of the inputs (fixed across lengthscales) and `S` the
/// scaled coefficient matrix of one expansion. With `P = QR` the SVD of `X`
/// comes from the small matrix `R S`.
struct Projection {
    r: DMatrix<f64>,
    /// `Qᵀ y`.
    qty: DVector<f64>,
    /// `‖y − Q Qᵀ y‖²`.
    outside: f64,
    observations: usize,
}

struct SliceSpectral {
    data: SpectralData,
    v: DMatrix<f64>,
}

impl Projection {
    fn new(data: &Dataset<f64>, domain: Interval<f64>, order: usize) -> Result<Self> {
        let n_obs = data.len();
        let mut table = vec![0.0; order];
        let mut p = DMatrix::zeros(n_obs, order);
        for (i, &x) in data.inputs().iter().enumerate() {
            legendre_table(domain.to_reference(x), &mut table);
            for (j, &v) in table.iter().enumerate() {
                p[(i, j)] = v;
            }
        }
        let qr = p.qr();
        let q = qr.q();
        let r = qr.r();
        let y = DVector::from_column_slice(data.targets());
        let qty = q.tr_mul(&y);
        let outside = (&y - &q * &qty).norm_squared();
        Ok(Self {
            r,
            qty,
            outside,
            observations: n_obs,
        })
    }

    fn spectral(&self, kl: &KlExpansion) -> Result<SliceSpectral> {
        let roots: Vec<f64> = kl.eigenvalues().iter().map(|v| v.sqrt()).collect();
        let c = kl.coefficients();
        let scaled = DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * roots[j]);
        let svd = linalg::thin_svd(&self.r * scaled)?;
        let z = svd.u.tr_mul(&self.qty);
        let inside = (&self.qty - &svd.u * &z).norm_squared();
        Ok(SliceSpectral {
            data: SpectralData {
                singular: svd.singular,
                projected: linalg::to_vec(&z),
                residual_sq: self.outside + inside,
                observations: self.observations,
            },
            v: svd.v,
        })
    }
}
