//! Seeded synthetic datasets used by the benchmarks and examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::regression::Dataset;

/// The smooth, increasingly oscillatory test function `cos(3 eˣ)`.
pub fn cos_exp(x: f64) -> f64 {
    (3.0 * x.exp()).cos()
}

/// `-x₂ + sin(6 x₁)`, the 2D test surface.
pub fn plane_sine(p: [f64; 2]) -> f64 {
    -p[1] + (6.0 * p[0]).sin()
}

fn noise(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::contract(format!("noise sd {sigma}: {e}")))
}

/// `N` equispaced inputs on `[-1, 1]` with `y = cos(3eˣ) + ε`, `ε ~ N(0, σ²)`.
pub fn cos_exp_dataset(n: usize, sigma: f64, seed: u64) -> Result<Dataset<f64>> {
    let eps = noise(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<f64> = match n {
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect(),
    };
    let targets = inputs
        .iter()
        .map(|&x| cos_exp(x) + eps.sample(&mut rng))
        .collect();
    Dataset::new(inputs, targets, sigma)
}

/// `N` uniform random inputs on `[-1, 1]²` with `y = -x₂ + sin(6x₁) + ε`.
pub fn plane_sine_dataset(n: usize, sigma: f64, seed: u64) -> Result<Dataset<[f64; 2]>> {
    let eps = noise(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)])
        .collect();
    let targets = inputs
        .iter()
        .map(|&p| plane_sine(p) + eps.sample(&mut rng))
        .collect();
    Dataset::new(inputs, targets, sigma)
}
