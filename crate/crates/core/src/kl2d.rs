//! KL expansions on a rectangle from a tensor-product Gauss grid.
//!
//! Grid point `(i, j)` (node `i` along x, node `j` along y) is flattened to
//! row `i · n_y + j` of the Nyström matrix.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::{BasisExpansion, Method};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::kl1d::{check_symmetric, clamp_spectrum};
use crate::linalg;
use crate::quadrature::{legendre_table, GaussRule, Interval, ValsToCoefsMap};

/// Largest per-axis order accepted; the dense eigensolve is `(n_x n_y)³`.
pub const MAX_AXIS_ORDER: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub x: Interval<f64>,
    pub y: Interval<f64>,
}

impl Rectangle {
    pub fn new(x: Interval<f64>, y: Interval<f64>) -> Self {
        Self { x, y }
    }

    pub fn reference() -> Self {
        Self::new(Interval::reference(), Interval::reference())
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.x.contains(p[0]) && self.y.contains(p[1])
    }

    pub fn area(&self) -> f64 {
        self.x.width() * self.y.width()
    }
}

impl fmt::Display for Rectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlExpansion2d {
    domain: Rectangle,
    orders: (usize, usize),
    spectrum: Vec<f64>,
    /// One `n_x × n_y` row-major block per retained eigenfunction:
    /// `u_l(x, y) = Σ_ij c_l[i, j] P_i(t_x) P_j(t_y)`.
    coefficients: Vec<Vec<f64>>,
}

impl KlExpansion2d {
    pub fn build<K>(kernel: K, domain: Rectangle, nx: usize, ny: usize) -> Result<Self>
    where
        K: Fn([f64; 2], [f64; 2]) -> f64 + Sync,
    {
        if nx < 2 || ny < 2 {
            return Err(Error::contract(format!(
                "per-axis orders must be >= 2, got {nx} x {ny}"
            )));
        }
        if nx > MAX_AXIS_ORDER || ny > MAX_AXIS_ORDER {
            return Err(Error::ResourceGuard(format!(
                "per-axis order {nx} x {ny} exceeds {MAX_AXIS_ORDER}; the dense eigensolve would be {} x {}",
                nx * ny,
                nx * ny
            )));
        }
        let rule_x = GaussRule::<f64>::new(nx)?;
        let rule_y = GaussRule::<f64>::new(ny)?;
        let (gx, wx) = rule_x.mapped(&domain.x);
        let (gy, wy) = rule_y.mapped(&domain.y);
        let size = nx * ny;
        let points: Vec<[f64; 2]> = (0..size).map(|r| [gx[r / ny], gy[r % ny]]).collect();
        let sqrt_w: Vec<f64> = (0..size)
            .map(|r| (wx[r / ny] * wy[r % ny]).sqrt())
            .collect();

        let rows: Vec<Vec<f64>> = (0..size)
            .into_par_iter()
            .map(|a| {
                (0..size)
                    .map(|b| sqrt_w[a] * sqrt_w[b] * kernel(points[a], points[b]))
                    .collect()
            })
            .collect();
        let a = DMatrix::from_fn(size, size, |i, j| rows[i][j]);
        check_symmetric(&a)?;
        let eig = linalg::symmetric_eigen(a)?;
        let spectrum = clamp_spectrum(eig.values)?;

        let mx = DMatrix::from_row_slice(nx, nx, ValsToCoefsMap::new(&rule_x).as_slice());
        let my = DMatrix::from_row_slice(ny, ny, ValsToCoefsMap::new(&rule_y).as_slice());
        let coefficients = (0..size)
            .map(|l| {
                let values = DMatrix::from_fn(nx, ny, |i, j| {
                    eig.vectors[(i * ny + j, l)] / sqrt_w[i * ny + j]
                });
                let c = &mx * values * my.transpose();
                let mut flat: Vec<f64> = (0..nx * ny).map(|r| c[(r / ny, r % ny)]).collect();
                let pivot = flat
                    .iter()
                    .fold(0.0f64, |p, &v| if v.abs() > p.abs() { v } else { p });
                if pivot < 0.0 {
                    flat.iter_mut().for_each(|v| *v = -*v);
                }
                flat
            })
            .collect();
        Ok(Self {
            domain,
            orders: (nx, ny),
            spectrum,
            coefficients,
        })
    }

    /// Square grid with `n` nodes per axis.
    pub fn build_square<K>(kernel: K, domain: Rectangle, n: usize) -> Result<Self>
    where
        K: Fn([f64; 2], [f64; 2]) -> f64 + Sync,
    {
        Self::build(kernel, domain, n, n)
    }

    pub fn from_spec(
        spec: &KernelSpec<f64>,
        domain: Rectangle,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        if spec.dimension() != 2 {
            return Err(Error::contract(
                "a 2D expansion needs a two-dimensional kernel",
            ));
        }
        Self::build(|p, q| spec.eval2(p, q), domain, nx, ny)
    }

    pub fn from_parts(
        domain: Rectangle,
        orders: (usize, usize),
        spectrum: Vec<f64>,
        coefficients: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let size = orders.0 * orders.1;
        if spectrum.len() != size
            || coefficients.len() > size
            || coefficients.iter().any(|c| c.len() != size)
        {
            return Err(Error::contract(
                "2D expansion parts have inconsistent sizes",
            ));
        }
        if spectrum.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || spectrum.windows(2).any(|p| p[0] < p[1])
        {
            return Err(Error::contract(
                "eigenvalues must be finite, non-negative and non-increasing",
            ));
        }
        Ok(Self {
            domain,
            orders,
            spectrum,
            coefficients,
        })
    }

    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m > self.coefficients.len() {
            return Err(Error::contract(format!(
                "cannot truncate rank-{} expansion to {m}",
                self.coefficients.len()
            )));
        }
        Ok(Self {
            coefficients: self.coefficients[..m].to_vec(),
            ..self.clone()
        })
    }

    pub fn domain(&self) -> Rectangle {
        self.domain
    }

    pub fn orders(&self) -> (usize, usize) {
        self.orders
    }

    pub fn method(&self) -> Method {
        Method::Tensor
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum[..self.coefficients.len()]
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Row-major `n_x × n_y` coefficient block of eigenfunction `l`.
    pub fn coefficient_block(&self, l: usize) -> &[f64] {
        &self.coefficients[l]
    }

    pub fn truncation_tail(&self) -> f64 {
        self.spectrum[self.coefficients.len()..]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Unscaled eigenfunctions `u_l(p)`.
    pub fn eval_eigenfunctions(&self, p: [f64; 2]) -> Result<Vec<f64>> {
        self.check_domain(p)?;
        let (px, py) = self.tables(p);
        Ok(self
            .coefficients
            .iter()
            .map(|c| self.contract_block(c, &px, &py))
            .collect())
    }

    fn tables(&self, p: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = self.orders;
        let mut px = vec![0.0; nx];
        let mut py = vec![0.0; ny];
        legendre_table(self.domain.x.to_reference(p[0]), &mut px);
        legendre_table(self.domain.y.to_reference(p[1]), &mut py);
        (px, py)
    }

    fn contract_block(&self, block: &[f64], px: &[f64], py: &[f64]) -> f64 {
        block
            .chunks_exact(self.orders.1)
            .zip(px)
            .map(|(row, &a)| a * linalg::dot(row, py))
            .sum()
    }

    fn check_domain(&self, p: [f64; 2]) -> Result<()> {
        if self.domain.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                point: format!("({}, {})", p[0], p[1]),
                domain: self.domain.to_string(),
            })
        }
    }
}

impl BasisExpansion for KlExpansion2d {
    type Point = [f64; 2];

    fn rank(&self) -> usize {
        self.coefficients.len()
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        self.domain.contains(p)
    }

    fn domain_label(&self) -> String {
        self.domain.to_string()
    }

    fn eval_basis_into(&self, p: [f64; 2], out: &mut [f64]) -> Result<()> {
        self.check_domain(p)?;
        let (px, py) = self.tables(p);
        for ((o, c), &lam) in out.iter_mut().zip(&self.coefficients).zip(&self.spectrum) {
            *o = lam.sqrt() * self.contract_block(c, &px, &py);
        }
        Ok(())
    }
}
