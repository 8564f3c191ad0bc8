//! Recursive-bisection Gauss quadrature.

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::scalar::Scalar;

pub const DEFAULT_PANEL_ORDER: usize = 16;
pub const DEFAULT_MAX_DEPTH: usize = 40;
/// Bisections allowed per call. Depth alone does not bound the work: an
/// integrand whose noise exceeds the tolerance everywhere would refine a
/// full binary tree of depth 40.
pub const DEFAULT_MAX_PANELS: usize = 1 << 16;

/// Adaptive integrator: a panel is accepted when its single-panel estimate and
/// the sum over its two halves agree within the panel's share of the tolerance.
#[derive(Debug, Clone)]
pub struct AdaptiveQuadrature<T = f64> {
    rule: GaussRule<T>,
    abs_tol: T,
    rel_tol: T,
    max_depth: usize,
    max_panels: usize,
}

impl<T: Scalar> AdaptiveQuadrature<T> {
    /// Absolute tolerance `tol`, order-16 panels, depth limit 40.
    pub fn new(tol: T) -> Result<Self> {
        if !(tol > T::zero()) {
            return Err(Error::contract("quadrature tolerance must be positive"));
        }
        Ok(Self {
            rule: GaussRule::new(DEFAULT_PANEL_ORDER)?,
            abs_tol: tol,
            rel_tol: T::zero(),
            max_depth: DEFAULT_MAX_DEPTH,
            max_panels: DEFAULT_MAX_PANELS,
        })
    }

    /// Also accept once the error is below `rel_tol` times the (pre-estimated) integral.
    pub fn with_relative(mut self, rel_tol: T) -> Self {
        self.rel_tol = rel_tol.max(T::zero());
        self
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn with_max_panels(mut self, panels: usize) -> Self {
        self.max_panels = panels;
        self
    }

    pub fn with_panel_order(mut self, order: usize) -> Result<Self> {
        self.rule = GaussRule::new(order)?;
        Ok(self)
    }

    /// Integrates `f` over `[a, b]`. Exceeding the depth limit or the panel
    /// budget yields
    /// [`Error::QuadratureDepth`] carrying the estimate assembled so far.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T) -> Result<T> {
        if a == b {
            return Ok(T::zero());
        }
        let whole = self.rule.integrate_on(a, b, &mut f);
        let mut tol = self.abs_tol;
        if self.rel_tol > T::zero() {
            // Coarse pre-pass over eight panels fixes the relative target.
            let eighth = (b - a) / T::lit(8.0);
            let mut rough = T::zero();
            for k in 0..8 {
                let lo = a + eighth * T::from_count(k);
                rough = rough + self.rule.integrate_on(lo, lo + eighth, &mut f);
            }
            tol = tol.max(self.rel_tol * rough.abs());
        }
        let mut state = Walk {
            f,
            rule: &self.rule,
            max_depth: self.max_depth,
            panels_left: self.max_panels,
            exceeded: false,
        };
        let total = state.refine(a, b, whole, tol, 0);
        if state.exceeded {
            Err(Error::QuadratureDepth {
                depth: self.max_depth,
                partial: total.as_f64(),
            })
        } else {
            Ok(total)
        }
    }
}

struct Walk<'r, T, F> {
    f: F,
    rule: &'r GaussRule<T>,
    max_depth: usize,
    panels_left: usize,
    exceeded: bool,
}

impl<T: Scalar, F: FnMut(T) -> T> Walk<'_, T, F> {
    fn refine(&mut self, a: T, b: T, coarse: T, tol: T, depth: usize) -> T {
        let mid = (a + b) / T::lit(2.0);
        let left = self.rule.integrate_on(a, mid, &mut self.f);
        let right = self.rule.integrate_on(mid, b, &mut self.f);
        let fine = left + right;
        if (fine - coarse).abs() <= tol {
            return fine;
        }
        if depth + 1 >= self.max_depth || self.panels_left == 0 || mid <= a || mid >= b {
            self.exceeded = true;
            return fine;
        }
        self.panels_left -= 1;
        let half = tol / T::lit(2.0);
        self.refine(a, mid, left, half, depth + 1) + self.refine(mid, b, right, half, depth + 1)
    }
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_integrate<T: Scalar, F: FnMut(T) -> T>(f: F, a: T, b: T, tol: T) -> Result<T> {
    AdaptiveQuadrature::new(tol)?.integrate(f, a, b)
}
