//! Error control for KL expansions: the L² effective-kernel error
//! `ε = ‖k − k_m‖₂`, the discretization proxy `δ_max` comparing builds at
//! `n` and `2n`, the truncation tail and automatic order selection.

use std::cell::Cell;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::adaptive::AdaptiveQuadrature;
use crate::basis::BasisExpansion;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::kl1d::KlExpansion;
use crate::kl2d::KlExpansion2d;
use crate::quadrature::{GaussRule, Interval};

/// Largest discretization order [`choose_order`] will try.
pub const ORDER_CAP: usize = 1024;

/// Integrand values carry roundoff of a few ulps of the kernel scale; the
/// squared-error integral cannot be resolved below this multiple of it.
const ROUNDOFF_ULPS: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub n: usize,
    pub m: usize,
    /// `max_{i≤m} |λ_i^n − λ_i^{2n}|`.
    pub delta_max: f64,
    /// `√(Σ_{i>m} λ_i²)` from the `2n` build.
    pub tail: f64,
    /// Measured `‖k − k_m‖₂`, when it was computed.
    pub epsilon: Option<f64>,
}

impl ErrorReport {
    pub fn proxy(&self) -> f64 {
        self.delta_max + self.tail
    }
}

/// `√(∫∫ (k(x, y) − Σ_i φ_i(x) φ_i(y))² dx dy)` by nested adaptive quadrature.
///
/// `tol` is relative to the squared error `ε²`. The inner integral is split at `y = x`
/// so a kink of the kernel on the diagonal never lies inside a panel. The
/// achievable accuracy is limited by roundoff in `k − k_m`, so the absolute
/// target never drops below that level.
pub fn effective_kernel_error<K>(kernel: K, expansion: &KlExpansion, tol: f64) -> Result<f64>
where
    K: Fn(f64, f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::contract("tolerance must be positive"));
    }
    let domain = expansion.domain();
    let (a, b) = (domain.lo(), domain.hi());
    let m = expansion.rank();
    let order = expansion.order();
    let mut table = vec![0.0; order];
    let mut phi_y = vec![0.0; m];
    let mut residual = |x: f64, phi_x: &[f64], y: f64| {
        expansion.basis_at_reference(domain.to_reference(y), &mut table, &mut phi_y);
        let km: f64 = phi_x.iter().zip(&phi_y).map(|(p, q)| p * q).sum();
        let r = kernel(x, y) - km;
        r * r
    };

    // Rough pass with fixed rules fixes the absolute target.
    let coarse = GaussRule::<f64>::new(48)?;
    let split = GaussRule::<f64>::new(24)?;
    let mut phi_x = vec![0.0; m];
    let mut scale = 0.0f64;
    let mut rough = 0.0;
    for (&t, &w) in coarse.nodes().iter().zip(coarse.weights()) {
        let x = domain.from_reference(t);
        expansion.eval_basis_into(x, &mut phi_x)?;
        scale = scale.max(kernel(x, x).abs());
        let inner = split.integrate_on(a, x, |y| residual(x, &phi_x, y))
            + split.integrate_on(x, b, |y| residual(x, &phi_x, y));
        rough += w * domain.half_width() * inner;
    }
    let width = b - a;
    // A perturbation `δ` of `r = k − k_m` moves `r²` by `2|r|δ + δ²`, so
    // the integral over the square of side `w` carries roundoff of about
    // `2 δ w ε + (δ w)²`.
    let delta = ROUNDOFF_ULPS * f64::EPSILON * scale * width;
    let floor = delta * (2.0 * rough.max(0.0).sqrt() + delta);
    let target = (tol * rough).max(floor);

    // Inner errors must sit well below the outer tolerance, or the outer
    // bisection chases their noise.
    let outer = AdaptiveQuadrature::new(0.5 * target)?;
    let inner = AdaptiveQuadrature::new(target / (16.0 * width))?;
    let failure: Cell<Option<Error>> = Cell::new(None);
    let total = outer.integrate(
        |x| {
            let mut phi_x = vec![0.0; m];
            if let Err(e) = expansion.eval_basis_into(x, &mut phi_x) {
                failure.set(Some(e));
                return 0.0;
            }
            let mut side =
                |lo: f64, hi: f64| match inner.integrate(|y| residual(x, &phi_x, y), lo, hi) {
                    Ok(v) => v,
                    Err(e) => {
                        let partial = match e {
                            Error::QuadratureDepth { partial, .. } => partial,
                            _ => 0.0,
                        };
                        failure.set(Some(e));
                        partial
                    }
                };
            side(a, x) + side(x, b)
        },
        a,
        b,
    );
    let total = match total {
        Ok(v) => v,
        Err(Error::QuadratureDepth { depth, partial }) => {
            return Err(Error::QuadratureDepth {
                depth,
                partial: partial.max(0.0).sqrt(),
            })
        }
        Err(e) => return Err(e),
    };
    match failure.into_inner() {
        None => Ok(total.max(0.0).sqrt()),
        Some(Error::QuadratureDepth { depth, .. }) => Err(Error::QuadratureDepth {
            depth,
            partial: total.max(0.0).sqrt(),
        }),
        Some(e) => Err(e),
    }
}

/// `‖k − k_m‖₂` on a rectangle by a fixed tensor Gauss rule with twice the
/// expansion's per-axis order along each axis.
pub fn effective_kernel_error_2d<K>(kernel: K, expansion: &KlExpansion2d) -> Result<f64>
where
    K: Fn([f64; 2], [f64; 2]) -> f64 + Sync,
{
    let domain = expansion.domain();
    let (nx, ny) = expansion.orders();
    let (gx, wx) = GaussRule::<f64>::new(2 * nx)?.mapped(&domain.x);
    let (gy, wy) = GaussRule::<f64>::new(2 * ny)?.mapped(&domain.y);
    let ny2 = gy.len();
    let size = gx.len() * ny2;
    let points: Vec<[f64; 2]> = (0..size).map(|r| [gx[r / ny2], gy[r % ny2]]).collect();
    let weights: Vec<f64> = (0..size).map(|r| wx[r / ny2] * wy[r % ny2]).collect();

    let m = expansion.rank();
    let phi_rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&p| expansion.eval_basis(p))
        .collect::<Result<_>>()?;
    let phi = DMatrix::from_fn(size, m, |i, j| phi_rows[i][j]);
    let km = &phi * phi.transpose();

    let total: f64 = (0..size)
        .into_par_iter()
        .map(|i| {
            (0..size)
                .map(|j| {
                    let r = kernel(points[i], points[j]) - km[(i, j)];
                    weights[j] * r * r
                })
                .sum::<f64>()
                * weights[i]
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total.sqrt())
}

/// Compares the spectra of builds at `n` and `2n` (aligned by sorted index)
/// and reads the truncation tail at `m` off the `2n` build.
pub fn discretization_proxy(
    spec: &KernelSpec<f64>,
    domain: Interval<f64>,
    n: usize,
    m: usize,
) -> Result<ErrorReport> {
    proxy_with(|order| KlExpansion::build(spec, domain, order), n, m)
}

/// [`discretization_proxy`] for an arbitrary builder `order ↦ expansion`.
pub fn proxy_with<B>(builder: B, n: usize, m: usize) -> Result<ErrorReport>
where
    B: Fn(usize) -> Result<KlExpansion> + Sync,
{
    if m > n {
        return Err(Error::contract(format!("truncation {m} exceeds order {n}")));
    }
    let (coarse, fine) = rayon::join(|| builder(n), || builder(2 * n));
    let (coarse, fine) = (coarse?, fine?);
    Ok(report_from(&coarse, &fine, m))
}

fn report_from(coarse: &KlExpansion, fine: &KlExpansion, m: usize) -> ErrorReport {
    let delta_max = coarse.spectrum()[..m]
        .iter()
        .zip(fine.spectrum())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ErrorReport {
        n: coarse.order(),
        m,
        delta_max,
        tail: tail_at(fine.spectrum(), m),
        epsilon: None,
    }
}

fn tail_at(spectrum: &[f64], m: usize) -> f64 {
    spectrum[m.min(spectrum.len())..]
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderChoice {
    pub n: usize,
    pub m: usize,
    pub report: ErrorReport,
    /// False when the order cap was reached before meeting the target;
    /// `report` then describes the best attempt.
    pub converged: bool,
}

/// Smallest order `n` (with its truncation `m`) whose proxy meets `target`.
///
/// `n` doubles from 16 until the proxy total is at most `target`, then a
/// bisection between the last failing and first passing order finds the
/// smallest passing `n`. At each order, `m` is the smallest index whose
/// tail is at most `target / 2`, capped at `n`. The builder is chosen by
/// the kernel's smoothness.
pub fn choose_order(
    spec: &KernelSpec<f64>,
    domain: Interval<f64>,
    target: f64,
) -> Result<OrderChoice> {
    choose_order_with(|order| KlExpansion::build(spec, domain, order), target)
}

pub fn choose_order_with<B>(builder: B, target: f64) -> Result<OrderChoice>
where
    B: Fn(usize) -> Result<KlExpansion> + Sync,
{
    if !(target > 1e-14) {
        return Err(Error::contract(format!(
            "target must exceed 1e-14, got {target}"
        )));
    }
    let assess = |n: usize| -> Result<ErrorReport> {
        let (coarse, fine) = rayon::join(|| builder(n), || builder(2 * n));
        let (coarse, fine) = (coarse?, fine?);
        let spectrum = fine.spectrum();
        let m = (1..=n)
            .find(|&m| tail_at(spectrum, m) <= 0.5 * target)
            .unwrap_or(n);
        Ok(report_from(&coarse, &fine, m))
    };

    let mut n = 16;
    let mut failing = None;
    let mut report = assess(n)?;
    while report.proxy() > target {
        if 2 * n > ORDER_CAP {
            return Ok(OrderChoice {
                n,
                m: report.m,
                report,
                converged: false,
            });
        }
        failing = Some(n);
        n *= 2;
        report = assess(n)?;
    }
    if let Some(mut lo) = failing {
        let mut hi = n;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let candidate = assess(mid)?;
            if candidate.proxy() <= target {
                hi = mid;
                report = candidate;
            } else {
                lo = mid;
            }
        }
        n = hi;
    }
    Ok(OrderChoice {
        n,
        m: report.m,
        report,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kernel_is_exact() {
        let kl = KlExpansion::build_smooth(|_, _| 1.0, Interval::reference(), 8)
            .unwrap()
            .truncate(1)
            .unwrap();
        assert!(effective_kernel_error(|_, _| 1.0, &kl, 1e-8).unwrap() <= 1e-12);
        let spec = KernelSpec::new(crate::kernels::KernelFamily::Constant, 1.0, 1.0, 1).unwrap();
        let report = discretization_proxy(&spec, Interval::reference(), 8, 1).unwrap();
        assert!(report.delta_max <= 1e-13);
        assert!(report.tail <= 1e-13);
        for target in [1e-3, 1e-8, 1e-12] {
            let choice = choose_order(&spec, Interval::reference(), target).unwrap();
            assert_eq!((choice.n, choice.m), (16, 1));
        }
    }

    #[test]
    fn truncation_beyond_order_is_rejected() {
        let spec = KernelSpec::squared_exponential(1.0, 0.3, 1).unwrap();
        assert!(discretization_proxy(&spec, Interval::reference(), 5, 6).is_err());
        assert!(choose_order(&spec, Interval::reference(), 1e-15).is_err());
    }

    #[test]
    fn two_d_constant_kernel_is_exact() {
        let kl = KlExpansion2d::build_square(|_, _| 1.0, crate::kl2d::Rectangle::reference(), 4)
            .unwrap()
            .truncate(1)
            .unwrap();
        assert!(effective_kernel_error_2d(|_, _| 1.0, &kl).unwrap() <= 1e-12);
    }
}
