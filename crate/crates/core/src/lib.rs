//! Reduced-rank Gaussian processes through numerically computed
//! Karhunen-Loève expansions.
//!
//! A GP prior `f ~ GP(0, k)` on an interval or rectangle is replaced by the
//! truncated expansion `f ≈ Σ_{i≤m} α_i φ_i` with `α_i ~ N(0, 1)` and
//! `φ_i = √λ_i u_i`, where `(λ_i, u_i)` are eigenpairs of the covariance
//! integral operator. Eigenfunctions are stored as Legendre expansions, so
//! the basis can be evaluated anywhere in the domain at `O(nm)` cost.
//!
//! Regression then reduces to ridge regression on the `N × m` design matrix
//! `X_ij = φ_j(x_i)`, which costs `O(N m²)` through its SVD.
//!
//! The quadrature and kernel layers are generic over [`Scalar`]
//! (`f32`/`f64`); the eigensolvers, regression and inference run in `f64`.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod basis;
pub mod bayes;
pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod kl1d;
pub mod kl2d;
mod linalg;
pub mod quadrature;
pub mod regression;
pub mod scalar;
pub mod serialize;
pub mod synthetic;

pub use adaptive::{adaptive_integrate, AdaptiveQuadrature};
pub use basis::{BasisExpansion, Method};
pub use bayes::{
    AxisGrid, BayesFitter, BayesGrid, BayesPosterior, LengthscaleSlice, Moments, PriorSpec,
};
pub use diagnostics::{
    choose_order, discretization_proxy, effective_kernel_error, effective_kernel_error_2d,
    ErrorReport, OrderChoice,
};
pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec, Smoothness};
pub use kl1d::KlExpansion;
pub use kl2d::{KlExpansion2d, Rectangle};
pub use quadrature::{
    legendre_eval, vals_to_coefs, Basis, GaussRule, Interval, LegendreSeries, ValsToCoefsMap,
};
pub use regression::{
    design_matrix, log_evidence, predict, predict_many, ridge_fit, Dataset, DesignMatrix,
    PosteriorSummary, Prediction, SpectralData,
};
pub use scalar::Scalar;
pub use serialize::{read_expansion, write_expansion, StoredExpansion};

/// Double-precision Gauss rule.
pub type GaussRule64 = GaussRule<f64>;
pub type GaussRule32 = GaussRule<f32>;
pub type Interval64 = Interval<f64>;
pub type LegendreSeries64 = LegendreSeries<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type KernelSpec32 = KernelSpec<f32>;
