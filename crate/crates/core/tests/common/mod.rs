//! Checks shared by the invariant suite and the acceptance run.
#![allow(dead_code)]

use klgp::quadrature::legendre_table;
use klgp::{BasisExpansion, GaussRule, Interval, KernelSpec, KlExpansion, ValsToCoefsMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn se(ell: f64) -> impl Fn(f64, f64) -> f64 + Sync + Copy {
    move |x: f64, y: f64| (-(x - y).powi(2) / (2.0 * ell * ell)).exp()
}

pub fn matern32(ell: f64) -> impl Fn(f64, f64) -> f64 + Sync + Copy {
    move |x: f64, y: f64| {
        let s = 3f64.sqrt() * (x - y).abs() / ell;
        (1.0 + s) * (-s).exp()
    }
}

pub fn matern52(ell: f64) -> impl Fn(f64, f64) -> f64 + Sync + Copy {
    move |x: f64, y: f64| {
        let s = 5f64.sqrt() * (x - y).abs() / ell;
        (1.0 + s + s * s / 3.0) * (-s).exp()
    }
}

pub fn exponential(ell: f64) -> impl Fn(f64, f64) -> f64 + Sync + Copy {
    move |x: f64, y: f64| (-(x - y).abs() / ell).exp()
}

pub fn within_factor(value: f64, reference: f64, factor: f64) -> bool {
    value >= reference / factor && value <= reference * factor
}

/// Largest violation of `Σ w_i p(x_i) = ∫ p` over random polynomials of degree ≤ 2n − 1.
pub fn gauss_exactness_error(n: usize, seed: u64) -> f64 {
    let rule = GaussRule::<f64>::new(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let degree = rng.gen_range(0..2 * n);
        // Monomial x^degree: ∫_{-1}^{1} = 2/(d+1) for even d, 0 for odd.
        let exact = if degree % 2 == 0 {
            2.0 / (degree as f64 + 1.0)
        } else {
            0.0
        };
        let got = rule.integrate(|x| x.powi(degree as i32));
        let scale = exact
            .abs()
            .max(rule.integrate(|x| x.powi(degree as i32).abs()));
        worst = worst.max((got - exact).abs() / scale);
    }
    worst
}

/// Round trip `values → coefficients → values` on a random polynomial of
/// degree `n − 1`, relative to the data scale `max(1, max |value|)`.
pub fn vals_coefs_round_trip_error(n: usize, seed: u64) -> f64 {
    let rule = GaussRule::<f64>::new(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut table = vec![0.0; n];
    let values: Vec<f64> = rule
        .nodes()
        .iter()
        .map(|&x| {
            legendre_table(x, &mut table);
            table.iter().zip(&coefs).map(|(p, c)| p * c).sum()
        })
        .collect();
    let recovered = ValsToCoefsMap::new(&rule).apply(&values).unwrap();
    let coef_err = recovered
        .iter()
        .zip(&coefs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let series = klgp::vals_to_coefs(&rule, &values).unwrap();
    let value_err = rule
        .nodes()
        .iter()
        .zip(&values)
        .map(|(&x, v)| (series.eval(x) - v).abs())
        .fold(0.0, f64::max);
    let scale = values.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    coef_err.max(value_err) / scale
}

/// `|Σ λ_i − Σ w_i k(x_i, x_i)|` for a smooth-path build.
pub fn trace_error(kl: &KlExpansion, kernel: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = GaussRule::<f64>::new(kl.order()).unwrap();
    let (x, w) = rule.mapped(&kl.domain());
    let trace: f64 = x.iter().zip(&w).map(|(&xi, wi)| wi * kernel(xi, xi)).sum();
    (kl.spectrum().iter().sum::<f64>() - trace).abs()
}

/// `max |∫ u_i u_j − δ_ij|` for `i, j ≤ limit`, by Gauss quadrature exact
/// for the polynomial products.
pub fn orthonormality_error(kl: &KlExpansion, limit: usize) -> f64 {
    let rule = GaussRule::<f64>::new(kl.order() + 2).unwrap();
    let (x, w) = rule.mapped(&kl.domain());
    let values: Vec<Vec<f64>> = x
        .iter()
        .map(|&xi| kl.eval_eigenfunctions(xi).unwrap())
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..limit {
        for j in 0..=i {
            let inner: f64 = values.iter().zip(&w).map(|(u, wk)| wk * u[i] * u[j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner - target).abs());
        }
    }
    worst
}

/// Dense oracle for the reduced-rank posterior mean:
/// `k_m(x̃, x) (K_m + σ² I)⁻¹ y` with `K_m` built from the effective kernel.
pub fn dense_mean<E: BasisExpansion<Point = f64>>(
    expansion: &E,
    inputs: &[f64],
    targets: &[f64],
    noise: f64,
    query: f64,
) -> f64 {
    let n = inputs.len();
    let mut gram = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        expansion.effective_kernel(inputs[i], inputs[j]).unwrap()
    });
    for i in 0..n {
        gram[(i, i)] += noise * noise;
    }
    let solved = gram
        .cholesky()
        .expect("K_m + σ²I is positive definite")
        .solve(&nalgebra::DVector::from_column_slice(targets));
    inputs
        .iter()
        .zip(solved.iter())
        .map(|(&x, s)| expansion.effective_kernel(query, x).unwrap() * s)
        .sum()
}

pub fn spec_sweep() -> Vec<KernelSpec<f64>> {
    let mut out = Vec::new();
    for ell in [0.1, 0.3, 1.0] {
        out.push(KernelSpec::squared_exponential(1.0, ell, 1).unwrap());
        for nu in [0.5, 1.5, 2.5] {
            out.push(KernelSpec::matern(nu, 1.0, ell, 1).unwrap());
        }
    }
    out
}

pub fn reference() -> Interval<f64> {
    Interval::reference()
}
