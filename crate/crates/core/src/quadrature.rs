//! Legendre polynomials, Gauss-Legendre rules and the values-to-coefficients
//! transform on Gauss nodes.
//!
//! Everything here is generic over [`Scalar`]; the rest of the crate uses the
//! `f64` instantiation.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Newton iterations allowed per Gauss node before giving up.
const MAX_NEWTON_STEPS: usize = 100;

/// `P_degree(t)` by the three-term recurrence.
pub fn legendre_eval<T: Scalar>(degree: usize, t: T) -> T {
    let mut prev = T::one();
    if degree == 0 {
        return prev;
    }
    let mut cur = t;
    for i in 1..degree {
        let fi = T::from_count(i);
        let next = ((fi + fi + T::one()) * t * cur - fi * prev) / (fi + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[j] = P_j(t)` for `j = 0..out.len()`.
pub fn legendre_table<T: Scalar>(t: T, out: &mut [T]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = T::one();
    if n == 1 {
        return;
    }
    out[1] = t;
    for i in 1..n - 1 {
        let fi = T::from_count(i);
        out[i + 1] = ((fi + fi + T::one()) * t * out[i] - fi * out[i - 1]) / (fi + T::one());
    }
}

/// `sqrt((2j + 1) / 2)`, the factor turning `P_j` into the L2-normalized `P̄_j`.
pub fn normalization<T: Scalar>(degree: usize) -> T {
    (T::from_count(2 * degree + 1) / T::lit(2.0)).sqrt()
}

/// `(P_n(x), P_n'(x))` for `n >= 1`.
fn legendre_and_derivative<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut prev = T::one();
    let mut cur = x;
    for i in 1..n {
        let fi = T::from_count(i);
        let next = ((fi + fi + T::one()) * x * cur - fi * prev) / (fi + T::one());
        prev = cur;
        cur = next;
    }
    let fnn = T::from_count(n);
    let deriv = fnn * (x * cur - prev) / (x * x - T::one());
    (cur, deriv)
}

/// A closed interval `[a, b]` with `a < b`, together with the affine map onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T = f64> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::contract(format!(
                "interval needs finite a < b, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn reference() -> Self {
        Self {
            lo: -T::one(),
            hi: T::one(),
        }
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    /// Jacobian `(b - a) / 2` of the map from `[-1, 1]`.
    pub fn half_width(&self) -> T {
        (self.hi - self.lo) / T::lit(2.0)
    }

    pub fn midpoint(&self) -> T {
        (self.lo + self.hi) / T::lit(2.0)
    }

    /// `t = (2x - a - b) / (b - a)`.
    pub fn to_reference(&self, x: T) -> T {
        let t = (x + x - self.lo - self.hi) / (self.hi - self.lo);
        t.max(-T::one()).min(T::one())
    }

    pub fn from_reference(&self, t: T) -> T {
        self.midpoint() + self.half_width() * t
    }

    /// Membership with a few ulps of slack at the endpoints.
    pub fn contains(&self, x: T) -> bool {
        let slack = T::lit(4.0) * T::epsilon() * (self.lo.abs().max(self.hi.abs()).max(T::one()));
        x >= self.lo - slack && x <= self.hi + slack
    }
}

impl<T: Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Order-`n` Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule<T = f64> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussRule<T> {
    /// Nodes by Newton iteration on `P_n` from Chebyshev-angle starting points;
    /// weights `2 / ((1 - x^2) P_n'(x)^2)`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("Gauss rule order must be at least 1"));
        }
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let half = n / 2;
        let pi = T::PI();
        let two = T::lit(2.0);
        let tol = T::lit(4.0) * T::epsilon();
        // Positive roots, largest first; mirrored afterwards so the rule is exactly symmetric.
        for k in 0..half {
            let theta = pi * (T::from_count(k) + T::lit(0.75)) / (T::from_count(n) + T::lit(0.5));
            let mut x = theta.cos();
            let mut converged = false;
            for _ in 0..MAX_NEWTON_STEPS {
                let (p, dp) = legendre_and_derivative(n, x);
                let dx = p / dp;
                x = x - dx;
                if dx.abs() <= tol * x.abs().max(T::one()) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence {
                    what: "Gauss-Legendre node iteration",
                    iterations: MAX_NEWTON_STEPS,
                });
            }
            // One more step at the converged point.
            let (p, dp) = legendre_and_derivative(n, x);
            x = x - p / dp;
            let (_, dp) = legendre_and_derivative(n, x);
            let w = two / ((T::one() - x * x) * dp * dp);
            nodes[n - 1 - k] = x;
            nodes[k] = -x;
            weights[n - 1 - k] = w;
            weights[k] = w;
        }
        if n % 2 == 1 {
            let (_, dp) = legendre_and_derivative(n, T::zero());
            nodes[half] = T::zero();
            weights[half] = two / (dp * dp);
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in `(-1, 1)`, strictly increasing.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `Σ w_i f(x_i)` over `[-1, 1]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }

    /// Integral over `[a, b]` with the affinely mapped rule. `a > b` is allowed
    /// and flips the sign; `a == b` gives zero.
    pub fn integrate_on<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        half * self.integrate(|t| f(mid + half * t))
    }

    /// Nodes and weights mapped onto `interval`.
    pub fn mapped(&self, interval: &Interval<T>) -> (Vec<T>, Vec<T>) {
        let h = interval.half_width();
        let nodes = self
            .nodes
            .iter()
            .map(|&t| interval.from_reference(t))
            .collect();
        let weights = self.weights.iter().map(|&w| w * h).collect();
        (nodes, weights)
    }
}

/// Which Legendre family a coefficient vector refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `P_i` from the three-term recurrence.
    Ordinary,
    /// `P̄_i = sqrt((2i + 1) / 2) P_i`.
    Normalized,
}

/// A finite Legendre expansion living on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreSeries<T = f64> {
    coefficients: Vec<T>,
    basis: Basis,
    domain: Interval<T>,
}

impl<T: Scalar> LegendreSeries<T> {
    pub fn new(coefficients: Vec<T>, basis: Basis, domain: Interval<T>) -> Self {
        Self {
            coefficients,
            basis,
            domain,
        }
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<T> {
        self.coefficients
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn domain(&self) -> Interval<T> {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Evaluates at `x` in the series' domain (mapped to `[-1, 1]` first).
    pub fn eval(&self, x: T) -> T {
        let t = self.domain.to_reference(x);
        let n = self.coefficients.len();
        if n == 0 {
            return T::zero();
        }
        let scale = |j: usize| match self.basis {
            Basis::Ordinary => T::one(),
            Basis::Normalized => normalization::<T>(j),
        };
        let mut prev = T::one();
        let mut acc = self.coefficients[0] * scale(0);
        if n == 1 {
            return acc;
        }
        let mut cur = t;
        acc = acc + self.coefficients[1] * scale(1) * cur;
        for i in 1..n - 1 {
            let fi = T::from_count(i);
            let next = ((fi + fi + T::one()) * t * cur - fi * prev) / (fi + T::one());
            prev = cur;
            cur = next;
            acc = acc + self.coefficients[i + 1] * scale(i + 1) * cur;
        }
        acc
    }

    pub fn to_normalized(&self) -> Self {
        match self.basis {
            Basis::Normalized => self.clone(),
            Basis::Ordinary => Self {
                coefficients: self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| c / normalization::<T>(j))
                    .collect(),
                basis: Basis::Normalized,
                domain: self.domain,
            },
        }
    }

    pub fn to_ordinary(&self) -> Self {
        match self.basis {
            Basis::Ordinary => self.clone(),
            Basis::Normalized => Self {
                coefficients: self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| c * normalization::<T>(j))
                    .collect(),
                basis: Basis::Ordinary,
                domain: self.domain,
            },
        }
    }
}

/// The matrix `M` sending values at order-`n` Gauss nodes to the ordinary
/// Legendre coefficients of the interpolating polynomial.
///
/// Row `j` is `c_j = (2j + 1)/2 · Σ_i w_i P_j(x_i) f(x_i)`, exact for degree `<= n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValsToCoefsMap<T = f64> {
    order: usize,
    matrix: Vec<T>,
}

impl<T: Scalar> ValsToCoefsMap<T> {
    pub fn new(rule: &GaussRule<T>) -> Self {
        let n = rule.order();
        let mut matrix = vec![T::zero(); n * n];
        let mut table = vec![T::zero(); n];
        for (i, (&x, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
            legendre_table(x, &mut table);
            for (j, &p) in table.iter().enumerate() {
                let factor = (T::from_count(2 * j + 1)) / T::lit(2.0);
                matrix[j * n + i] = factor * w * p;
            }
        }
        Self { order: n, matrix }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Entry `(row, col)`; row = coefficient degree, col = node index.
    pub fn get(&self, row: usize, col: usize) -> T {
        self.matrix[row * self.order + col]
    }

    /// Row-major `n × n` storage.
    pub fn as_slice(&self) -> &[T] {
        &self.matrix
    }

    pub fn apply(&self, values: &[T]) -> Result<Vec<T>> {
        if values.len() != self.order {
            return Err(Error::contract(format!(
                "expected {} values at Gauss nodes, got {}",
                self.order,
                values.len()
            )));
        }
        Ok(self
            .matrix
            .chunks_exact(self.order)
            .map(|row| {
                row.iter()
                    .zip(values)
                    .fold(T::zero(), |acc, (&m, &v)| acc + m * v)
            })
            .collect())
    }
}

/// Ordinary-basis interpolant on `[-1, 1]` of `values` tabulated at the nodes of `rule`.
pub fn vals_to_coefs<T: Scalar>(rule: &GaussRule<T>, values: &[T]) -> Result<LegendreSeries<T>> {
    let coefficients = ValsToCoefsMap::new(rule).apply(values)?;
    Ok(LegendreSeries::new(
        coefficients,
        Basis::Ordinary,
        Interval::reference(),
    ))
}
