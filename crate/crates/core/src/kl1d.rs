//! Karhunen-Loève expansions of Gaussian processes on an interval.
//!
//! Two builders are provided:
//!
//! * [`KlExpansion::build_smooth`] discretizes the integral operator on
//!   Gauss-Legendre nodes as the symmetric matrix `√(w_i w_j) k(x_i, x_j)`,
//!   diagonalizes it and converts the un-weighted eigenvectors to Legendre
//!   coefficients. Converges quickly for kernels smooth across the diagonal.
//! * [`KlExpansion::build_nonsmooth`] applies the operator to normalized
//!   Legendre polynomials with quadrature split at each node, so a kink on
//!   the diagonal never sits inside a quadrature panel, and reads the
//!   eigenpairs off an SVD.
//!
//! Eigenfunctions are stored as ordinary Legendre coefficients in the
//! reference variable `t ∈ [-1, 1]` and are orthonormal in `L²[a, b]`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::{BasisExpansion, Method};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{self, max_abs, max_asymmetry};
use crate::quadrature::{
    legendre_table, normalization, Basis, GaussRule, Interval, LegendreSeries, ValsToCoefsMap,
};

/// Relative size below which a negative eigenvalue is treated as roundoff and clamped.
pub const PSD_TOLERANCE: f64 = 1e-12;
/// Relative asymmetry tolerated in the assembled Nyström matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Gauss order used on each side of the split in the non-smooth builder.
///
/// A fixed order stops integrating `k(x_i, ·) P̄_{n-1}` exactly once the
/// Legendre degree outgrows it, so the order tracks `n`.
pub fn split_panel_order(n: usize) -> usize {
    24usize.max(n / 2 + 24)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlExpansion {
    domain: Interval<f64>,
    order: usize,
    /// Every eigenvalue of the discretization (length `order`), clamped and non-increasing.
    spectrum: Vec<f64>,
    /// `order × rank`; column `i` holds the ordinary Legendre coefficients of `u_i`.
    coefficients: DMatrix<f64>,
    /// `rank × order` row-major, row `i` = `√λ_i` times column `i` of `coefficients`.
    scaled: Vec<f64>,
    method: Method,
}

impl KlExpansion {
    /// Symmetric Nyström discretization on `n` Gauss nodes mapped to `domain`.
    pub fn build_smooth<K>(kernel: K, domain: Interval<f64>, n: usize) -> Result<Self>
    where
        K: Fn(f64, f64) -> f64 + Sync,
    {
        if n < 2 {
            return Err(Error::contract(format!(
                "discretization order must be >= 2, got {n}"
            )));
        }
        let rule = GaussRule::<f64>::new(n)?;
        let (x, w) = rule.mapped(&domain);
        let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| sqrt_w[i] * sqrt_w[j] * kernel(x[i], x[j]))
                    .collect()
            })
            .collect();
        let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        check_symmetric(&a)?;

        let eig = linalg::symmetric_eigen(a)?;
        let spectrum = clamp_spectrum(eig.values)?;
        let mut unweighted = eig.vectors;
        for (i, mut row) in unweighted.row_iter_mut().enumerate() {
            row /= sqrt_w[i];
        }
        let m = ValsToCoefsMap::new(&rule);
        let m = DMatrix::from_row_slice(n, n, m.as_slice());
        let mut coefficients = m * unweighted;
        linalg::normalize_column_signs(&mut coefficients);
        Ok(Self::assemble(
            domain,
            n,
            spectrum,
            coefficients,
            Method::Smooth,
        ))
    }

    /// Split-quadrature discretization for kernels that are smooth off the diagonal.
    pub fn build_nonsmooth<K>(kernel: K, domain: Interval<f64>, n: usize) -> Result<Self>
    where
        K: Fn(f64, f64) -> f64 + Sync,
    {
        if n < 2 {
            return Err(Error::contract(format!(
                "discretization order must be >= 2, got {n}"
            )));
        }
        let rule = GaussRule::<f64>::new(n)?;
        let panel = GaussRule::<f64>::new(split_panel_order(n))?;
        let t = rule.nodes();
        let w = rule.weights();
        let x: Vec<f64> = t.iter().map(|&ti| domain.from_reference(ti)).collect();

        let gram = DMatrix::from_fn(n, n, |i, j| kernel(x[i], x[j]));
        check_symmetric(&gram)?;

        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; n];
                let mut table = vec![0.0; n];
                for (lo, hi) in [(-1.0, t[i]), (t[i], 1.0)] {
                    if hi <= lo {
                        continue;
                    }
                    let half = 0.5 * (hi - lo);
                    let mid = 0.5 * (hi + lo);
                    for (&g, &gw) in panel.nodes().iter().zip(panel.weights()) {
                        let s = mid + half * g;
                        legendre_table(s, &mut table);
                        let kv = half * gw * kernel(x[i], domain.from_reference(s));
                        for (r, &p) in row.iter_mut().zip(&table) {
                            *r += kv * p;
                        }
                    }
                }
                let sw = w[i].sqrt();
                for (j, r) in row.iter_mut().enumerate() {
                    *r *= sw * normalization::<f64>(j);
                }
                row
            })
            .collect();
        let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);

        let svd = linalg::thin_svd(a)?;
        // Q maps normalized coefficients to √w-weighted node values; for a PSD
        // operator the left singular vector u_k lines up with Q v_k.
        let mut table = vec![0.0; n];
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            legendre_table(t[i], &mut table);
            for j in 0..n {
                q[(i, j)] = w[i].sqrt() * normalization::<f64>(j) * table[j];
            }
        }
        let aligned = q * &svd.v;
        let top = svd.singular.first().copied().unwrap_or(0.0);
        for (k, &s) in svd.singular.iter().enumerate() {
            let alignment = svd.u.column(k).dot(&aligned.column(k));
            if alignment < -0.5 && s > PSD_TOLERANCE * top {
                return Err(Error::NotPsd {
                    index: k + 1,
                    value: -s * domain.half_width(),
                });
            }
        }

        let h = domain.half_width();
        let spectrum: Vec<f64> = svd.singular.iter().map(|s| s * h).collect();
        let scale = 1.0 / h.sqrt();
        let mut coefficients =
            DMatrix::from_fn(n, n, |j, k| svd.v[(j, k)] * normalization::<f64>(j) * scale);
        linalg::normalize_column_signs(&mut coefficients);
        Ok(Self::assemble(
            domain,
            n,
            spectrum,
            coefficients,
            Method::NonSmooth,
        ))
    }

    /// Builds from a [`KernelSpec`], choosing the builder by the kernel's smoothness.
    pub fn build(spec: &KernelSpec<f64>, domain: Interval<f64>, n: usize) -> Result<Self> {
        if spec.dimension() != 1 {
            return Err(Error::contract(
                "a 1D expansion needs a one-dimensional kernel",
            ));
        }
        let k = |x: f64, y: f64| spec.eval1(x, y);
        if spec.is_smooth() {
            Self::build_smooth(k, domain, n)
        } else {
            Self::build_nonsmooth(k, domain, n)
        }
    }

    fn assemble(
        domain: Interval<f64>,
        order: usize,
        spectrum: Vec<f64>,
        coefficients: DMatrix<f64>,
        method: Method,
    ) -> Self {
        let rank = coefficients.ncols();
        let mut scaled = vec![0.0; rank * order];
        for i in 0..rank {
            let root = spectrum[i].sqrt();
            for j in 0..order {
                scaled[i * order + j] = root * coefficients[(j, i)];
            }
        }
        Self {
            domain,
            order,
            spectrum,
            coefficients,
            scaled,
            method,
        }
    }

    /// Reassembles an expansion from stored parts, validating shapes and ordering.
    pub fn from_parts(
        domain: Interval<f64>,
        spectrum: Vec<f64>,
        coefficients: DMatrix<f64>,
        method: Method,
    ) -> Result<Self> {
        let order = spectrum.len();
        if order == 0 || coefficients.nrows() != order || coefficients.ncols() > order {
            return Err(Error::contract(format!(
                "expansion parts disagree: {} eigenvalues, coefficient matrix {}x{}",
                order,
                coefficients.nrows(),
                coefficients.ncols()
            )));
        }
        if spectrum.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || spectrum.windows(2).any(|p| p[0] < p[1])
        {
            return Err(Error::contract(
                "eigenvalues must be finite, non-negative and non-increasing",
            ));
        }
        Ok(Self::assemble(
            domain,
            order,
            spectrum,
            coefficients,
            method,
        ))
    }

    /// Keeps the `m` leading eigenpairs. `m = 0` gives the empty expansion.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m > self.rank() {
            return Err(Error::contract(format!(
                "cannot truncate rank-{} expansion to {m}",
                self.rank()
            )));
        }
        let coefficients = self.coefficients.columns(0, m).into_owned();
        Ok(Self::assemble(
            self.domain,
            self.order,
            self.spectrum.clone(),
            coefficients,
            self.method,
        ))
    }

    pub fn domain(&self) -> Interval<f64> {
        self.domain
    }

    /// Discretization order `n`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Retained eigenvalues `λ_1 ≥ … ≥ λ_m`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum[..self.rank()]
    }

    /// All `n` eigenvalues of the discretization, including truncated ones.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// `order × rank` matrix of ordinary Legendre coefficients.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// `√(Σ_{i>m} λ_i²)` over the discarded part of the spectrum.
    pub fn truncation_tail(&self) -> f64 {
        self.spectrum[self.rank()..]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn eigenfunction(&self, i: usize) -> LegendreSeries<f64> {
        LegendreSeries::new(
            self.coefficients.column(i).iter().copied().collect(),
            Basis::Ordinary,
            self.domain,
        )
    }

    /// `u_1(x), …, u_m(x)` (unscaled eigenfunctions).
    pub fn eval_eigenfunctions(&self, x: f64) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        let mut table = vec![0.0; self.order];
        legendre_table(self.domain.to_reference(x), &mut table);
        Ok(self
            .coefficients
            .column_iter()
            .map(|c| c.iter().zip(&table).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Legendre coefficients (ordinary basis, reference variable) of `Σ_i β_i φ_i`.
    pub fn combine(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.rank() {
            return Err(Error::contract(format!(
                "expected {} coefficients, got {}",
                self.rank(),
                beta.len()
            )));
        }
        let mut out = vec![0.0; self.order];
        for (row, &b) in self.scaled.chunks_exact(self.order).zip(beta) {
            for (o, &s) in out.iter_mut().zip(row) {
                *o += b * s;
            }
        }
        Ok(out)
    }

    /// `Σ_{i≤m} α_i φ_i` on `grid` with `α_i` iid standard normal drawn from `seed`.
    pub fn sample(&self, seed: u64, grid: &[f64]) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha: Vec<f64> = (0..self.rank())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let mut phi = vec![0.0; self.rank()];
        grid.iter()
            .map(|&x| {
                self.eval_basis_into(x, &mut phi)?;
                Ok(linalg::dot(&phi, &alpha))
            })
            .collect()
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                point: format!("{x}"),
                domain: self.domain.to_string(),
            })
        }
    }

    /// `φ` at a reference coordinate, reusing `table` (length `order`).
    pub(crate) fn basis_at_reference(&self, t: f64, table: &mut [f64], out: &mut [f64]) {
        legendre_table(t, table);
        for (o, row) in out.iter_mut().zip(self.scaled.chunks_exact(self.order)) {
            *o = linalg::dot(row, table);
        }
    }
}

impl BasisExpansion for KlExpansion {
    type Point = f64;

    fn rank(&self) -> usize {
        self.coefficients.ncols()
    }

    fn contains(&self, p: f64) -> bool {
        self.domain.contains(p)
    }

    fn domain_label(&self) -> String {
        self.domain.to_string()
    }

    fn eval_basis_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        self.check_domain(x)?;
        let mut table = vec![0.0; self.order];
        self.basis_at_reference(self.domain.to_reference(x), &mut table, out);
        Ok(())
    }
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let scale = max_abs(a);
    let asymmetry = max_asymmetry(a);
    if asymmetry > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { asymmetry, scale });
    }
    Ok(())
}

/// Rejects eigenvalues below `-PSD_TOLERANCE · max|λ|` and clamps the rest at zero.
pub(crate) fn clamp_spectrum(values: Vec<f64>) -> Result<Vec<f64>> {
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for (i, &v) in values.iter().enumerate() {
        if v < -PSD_TOLERANCE * scale || !v.is_finite() {
            return Err(Error::NotPsd {
                index: i + 1,
                value: v,
            });
        }
    }
    Ok(values.into_iter().map(|v| v.max(0.0)).collect())
}
