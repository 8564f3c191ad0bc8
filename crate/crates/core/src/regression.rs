//! Reduced-rank GP regression: with `K ≈ X Xᵀ`, `X_ij = φ_j(x_i)`, the GP
//! posterior becomes ridge regression on the basis coefficients.
//!
//! All posterior algebra goes through the thin SVD `X = U D Vᵀ`; no `N × N`
//! matrix is ever formed. Posterior mean coefficients are
//! `β̄ = V (D² + σ²I)⁻¹ D Uᵀ y` and the coefficient covariance is
//! `I − V D²(D² + σ²I)⁻¹ Vᵀ`, which equals `σ² V (D² + σ² I)⁻¹ Vᵀ` when
//! `N ≥ m` and keeps the prior in the directions the data does not see
//! when `N < m`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::BasisExpansion;
use crate::error::{Error, Result};
use crate::linalg;

/// Observations `y_i = f(x_i) + ε_i`, `ε_i ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<P> {
    inputs: Vec<P>,
    targets: Vec<f64>,
    noise: f64,
}

impl<P: Copy> Dataset<P> {
    pub fn new(inputs: Vec<P>, targets: Vec<f64>, noise: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::contract("dataset needs at least one observation"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::contract(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::contract(format!(
                "noise must be positive, got {noise}"
            )));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::contract("targets must be finite"));
        }
        Ok(Self {
            inputs,
            targets,
            noise,
        })
    }

    pub fn inputs(&self) -> &[P] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn with_noise(&self, noise: f64) -> Result<Self> {
        Self::new(self.inputs.clone(), self.targets.clone(), noise)
    }
}

/// What the evidence and the ridge solution need from `(X, y)`:
/// singular values `d`, `z = Uᵀy` and the residual `‖y − U z‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub singular: Vec<f64>,
    pub projected: Vec<f64>,
    pub residual_sq: f64,
    pub observations: usize,
}

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    u: DMatrix<f64>,
    singular: Vec<f64>,
    v: DMatrix<f64>,
}

impl DesignMatrix {
    /// `X_ij = φ_j(x_i)` followed by its thin SVD.
    pub fn new<E: BasisExpansion>(expansion: &E, inputs: &[E::Point]) -> Result<Self> {
        let m = expansion.rank();
        if inputs.is_empty() {
            return Err(Error::contract("design matrix needs at least one input"));
        }
        if let Some((row, p)) = inputs
            .iter()
            .enumerate()
            .find(|(_, p)| !expansion.contains(**p))
        {
            return Err(Error::RowOutsideDomain {
                row: row + 1,
                point: format!("{p:?}"),
                domain: expansion.domain_label(),
            });
        }
        let rows: Vec<Vec<f64>> = inputs
            .par_iter()
            .map(|&p| {
                let mut out = vec![0.0; m];
                expansion.eval_basis_into(p, &mut out).map(|_| out)
            })
            .collect::<Result<_>>()?;
        let x = DMatrix::from_fn(inputs.len(), m, |i, j| rows[i][j]);
        Self::from_matrix(x)
    }

    pub fn from_matrix(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::contract("design matrix must be non-empty"));
        }
        let svd = linalg::thin_svd(x.clone())?;
        Ok(Self {
            x,
            u: svd.u,
            singular: svd.singular,
            v: svd.v,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// `N × k` left singular vectors, `k = min(N, m)`.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    /// `m × k` right singular vectors.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn spectral(&self, y: &[f64]) -> Result<SpectralData> {
        if y.len() != self.rows() {
            return Err(Error::contract(format!(
                "{} targets for a design with {} rows",
                y.len(),
                self.rows()
            )));
        }
        let y = DVector::from_column_slice(y);
        let z = self.u.tr_mul(&y);
        let residual = &y - &self.u * &z;
        Ok(SpectralData {
            singular: self.singular.clone(),
            projected: linalg::to_vec(&z),
            residual_sq: residual.norm_squared(),
            observations: self.rows(),
        })
    }
}

pub fn design_matrix<E: BasisExpansion>(
    expansion: &E,
    dataset: &Dataset<E::Point>,
) -> Result<DesignMatrix> {
    DesignMatrix::new(expansion, dataset.inputs())
}

/// `log N(y | 0, α X Xᵀ + σ² I)` from the SVD of `X`.
///
/// This is `log ∫ N(y | Xβ, σ²I) N(β | 0, αI) dβ`.
pub fn log_evidence(data: &SpectralData, alpha: f64, sigma: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    if alpha <= TINY && sigma * sigma <= TINY {
        return Err(Error::IllPosedEvidence { alpha, sigma });
    }
    if !(sigma > 0.0) || !(alpha >= 0.0) {
        return Err(Error::contract(format!(
            "evidence needs alpha >= 0 and sigma > 0, got alpha = {alpha}, sigma = {sigma}"
        )));
    }
    let n = data.observations as f64;
    let k = data.singular.len() as f64;
    let s2 = sigma * sigma;
    let mut logdet = (n - k) * s2.ln();
    let mut quad = data.residual_sq / s2;
    for (&d, &z) in data.singular.iter().zip(&data.projected) {
        let v = alpha * d * d + s2;
        logdet += v.ln();
        quad += z * z / v;
    }
    Ok(-0.5 * (logdet + quad + n * (2.0 * std::f64::consts::PI).ln()))
}

/// Gaussian posterior over the basis coefficients under `β ~ N(0, I)`.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    beta: Vec<f64>,
    v: DMatrix<f64>,
    singular: Vec<f64>,
    noise: f64,
    log_evidence: f64,
}

impl PosteriorSummary {
    pub fn beta_mean(&self) -> &[f64] {
        &self.beta
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// `log p(y)` under the reduced-rank model.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn rank(&self) -> usize {
        self.beta.len()
    }

    /// Dense `m × m` posterior covariance of `β`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.rank();
        let s2 = self.noise * self.noise;
        let shrink = DVector::from_iterator(
            self.singular.len(),
            self.singular.iter().map(|d| d * d / (d * d + s2)),
        );
        let scaled = DMatrix::from_fn(m, self.singular.len(), |i, j| self.v[(i, j)] * shrink[j]);
        DMatrix::identity(m, m) - scaled * self.v.transpose()
    }

    /// `φᵀ Cov(β) φ` without forming the covariance.
    pub fn latent_variance(&self, phi: &[f64]) -> f64 {
        let s2 = self.noise * self.noise;
        let g = self.v.tr_mul(&DVector::from_column_slice(phi));
        let kept: f64 = g
            .iter()
            .zip(&self.singular)
            .map(|(g, d)| s2 * g * g / (d * d + s2))
            .sum();
        if self.singular.len() == self.rank() {
            kept
        } else {
            let total: f64 = phi.iter().map(|p| p * p).sum();
            (total - g.norm_squared()).max(0.0) + kept
        }
    }
}

/// Ridge solution `(XᵀX + σ²I) β = Xᵀy` via the SVD.
pub fn ridge_fit<P: Copy>(design: &DesignMatrix, dataset: &Dataset<P>) -> Result<PosteriorSummary> {
    ridge_fit_targets(design, dataset.targets(), dataset.noise())
}

pub fn ridge_fit_targets(design: &DesignMatrix, y: &[f64], noise: f64) -> Result<PosteriorSummary> {
    if !(noise > 0.0) {
        return Err(Error::contract(format!(
            "noise must be positive, got {noise}"
        )));
    }
    let data = design.spectral(y)?;
    let s2 = noise * noise;
    let weights = DVector::from_iterator(
        data.singular.len(),
        data.singular
            .iter()
            .zip(&data.projected)
            .map(|(d, z)| d * z / (d * d + s2)),
    );
    let beta = design.v() * weights;
    Ok(PosteriorSummary {
        beta: linalg::to_vec(&beta),
        v: design.v().clone(),
        singular: data.singular.clone(),
        noise,
        log_evidence: log_evidence(&data, 1.0, noise)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Variance of the latent `f(x̃)`.
    pub latent_variance: f64,
    /// Variance of a new noisy observation at `x̃`: latent plus `σ²`.
    pub predictive_variance: f64,
}

pub fn predict<E: BasisExpansion>(
    expansion: &E,
    summary: &PosteriorSummary,
    point: E::Point,
) -> Result<Prediction> {
    if expansion.rank() != summary.rank() {
        return Err(Error::contract(format!(
            "expansion rank {} does not match posterior rank {}",
            expansion.rank(),
            summary.rank()
        )));
    }
    let phi = expansion.eval_basis(point)?;
    let mean = linalg::dot(&phi, summary.beta_mean());
    let latent = summary.latent_variance(&phi);
    Ok(Prediction {
        mean,
        latent_variance: latent,
        predictive_variance: latent + summary.noise * summary.noise,
    })
}

/// Predictions at many points, evaluated in parallel, order preserved.
pub fn predict_many<E: BasisExpansion>(
    expansion: &E,
    summary: &PosteriorSummary,
    points: &[E::Point],
) -> Result<Vec<Prediction>> {
    points
        .par_iter()
        .map(|&p| predict(expansion, summary, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::kl1d::KlExpansion;
    use crate::quadrature::Interval;
    use approx::assert_abs_diff_eq;

    fn se_expansion(n: usize, m: usize) -> KlExpansion {
        let spec = KernelSpec::squared_exponential(1.0, 0.3, 1).unwrap();
        KlExpansion::build(&spec, Interval::reference(), n)
            .unwrap()
            .truncate(m)
            .unwrap()
    }

    #[test]
    fn constant_kernel_design_is_ones() {
        let kl = KlExpansion::build_smooth(|_, _| 1.0, Interval::reference(), 6)
            .unwrap()
            .truncate(1)
            .unwrap();
        let design = DesignMatrix::new(&kl, &[-0.9, 0.1, 0.5, 1.0]).unwrap();
        for &x in design.matrix().iter() {
            assert_abs_diff_eq!(x.abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn outside_rows_are_named() {
        let kl = se_expansion(10, 5);
        match DesignMatrix::new(&kl, &[0.0, 0.5, 1.5]) {
            Err(Error::RowOutsideDomain { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_targets_give_zero_mean() {
        let kl = se_expansion(20, 8);
        let inputs: Vec<f64> = (0..12).map(|i| -1.0 + i as f64 / 6.0).collect();
        let data = Dataset::new(inputs, vec![0.0; 12], 0.3).unwrap();
        let design = design_matrix(&kl, &data).unwrap();
        let fit = ridge_fit(&design, &data).unwrap();
        assert!(fit.beta_mean().iter().all(|&b| b == 0.0));
        let s2 = 0.09;
        let v = design.v();
        let d = design.singular_values();
        let expected = DMatrix::from_fn(8, 8, |i, j| {
            (0..8)
                .map(|k| s2 * v[(i, k)] * v[(j, k)] / (d[k] * d[k] + s2))
                .sum::<f64>()
        });
        assert!((fit.covariance() - expected).amax() < 1e-13);
    }

    #[test]
    fn huge_noise_shrinks_to_prior() {
        let kl = se_expansion(20, 10);
        let inputs: Vec<f64> = (0..30).map(|i| -1.0 + i as f64 / 14.5).collect();
        let targets: Vec<f64> = inputs.iter().map(|x| (3.0 * x).sin()).collect();
        let data = Dataset::new(inputs, targets, 1e6).unwrap();
        let fit = ridge_fit(&design_matrix(&kl, &data).unwrap(), &data).unwrap();
        let norm: f64 = fit.beta_mean().iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(norm <= 1e-9);
        // Latent variance tends to the prior variance k_m(x, x).
        let p = predict(&kl, &fit, 0.2).unwrap();
        assert_abs_diff_eq!(
            p.latent_variance,
            kl.effective_kernel(0.2, 0.2).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn evidence_without_signal_is_white_noise() {
        let kl = se_expansion(12, 6);
        let inputs = vec![-0.5, 0.0, 0.25, 0.9];
        let y = [0.3, -1.2, 0.8, 0.05];
        let design = DesignMatrix::new(&kl, &inputs).unwrap();
        let data = design.spectral(&y).unwrap();
        let sigma: f64 = 0.7;
        let ynorm: f64 = y.iter().map(|v| v * v).sum();
        let expected = -0.5
            * (4.0 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() + ynorm / (sigma * sigma));
        assert_abs_diff_eq!(
            log_evidence(&data, 0.0, sigma).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert!(matches!(
            log_evidence(&data, 0.0, 0.0),
            Err(Error::IllPosedEvidence { .. })
        ));
        assert!(log_evidence(&data, 1.0, -1.0).is_err());
    }

    #[test]
    fn evidence_quadratic_term_scales() {
        let kl = se_expansion(12, 6);
        let inputs = vec![-0.8, -0.1, 0.3, 0.6, 0.95];
        let y = [0.3, -1.2, 0.8, 0.05, 0.4];
        let c = 3.0;
        let cy: Vec<f64> = y.iter().map(|v| c * v).collect();
        let design = DesignMatrix::new(&kl, &inputs).unwrap();
        let (a, s) = (1.3, 0.4);
        let base = log_evidence(&design.spectral(&y).unwrap(), a, s).unwrap();
        let scaled = log_evidence(&design.spectral(&cy).unwrap(), a, s).unwrap();
        let zero = log_evidence(&design.spectral(&[0.0; 5]).unwrap(), a, s).unwrap();
        // log p = const − q/2 with q quadratic in y.
        assert_abs_diff_eq!(scaled - zero, c * c * (base - zero), epsilon = 1e-10);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(Vec::<f64>::new(), vec![], 1.0).is_err());
        assert!(Dataset::new(vec![0.0], vec![1.0, 2.0], 1.0).is_err());
        assert!(Dataset::new(vec![0.0], vec![1.0], 0.0).is_err());
    }
}
