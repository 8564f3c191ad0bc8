use std::fmt::Debug;

use crate::error::Result;

/// How an expansion was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Weight-symmetrized Nyström matrix on Gauss nodes (smooth kernels).
    Smooth,
    /// Split-panel quadrature against normalized Legendre polynomials plus SVD
    /// (kernels with a kink on the diagonal).
    NonSmooth,
    /// Tensor-product Gauss grid on a rectangle.
    Tensor,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Smooth => "smooth",
            Method::NonSmooth => "nonsmooth",
            Method::Tensor => "tensor",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "smooth" => Some(Method::Smooth),
            "nonsmooth" => Some(Method::NonSmooth),
            "tensor" => Some(Method::Tensor),
            _ => None,
        }
    }
}

/// A truncated KL expansion viewed as a finite feature map
/// `p ↦ (φ_1(p), …, φ_m(p))` with `φ_i = √λ_i u_i`.
pub trait BasisExpansion: Sync {
    type Point: Copy + Debug + Send + Sync;

    /// Number of retained basis functions `m`.
    fn rank(&self) -> usize;

    fn contains(&self, p: Self::Point) -> bool;

    fn domain_label(&self) -> String;

    /// Writes `φ_1(p), …, φ_m(p)` into `out` (length `m`); errors outside the domain.
    fn eval_basis_into(&self, p: Self::Point, out: &mut [f64]) -> Result<()>;

    fn eval_basis(&self, p: Self::Point) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rank()];
        self.eval_basis_into(p, &mut out)?;
        Ok(out)
    }

    /// Effective kernel `k_m(p, q) = Σ_i φ_i(p) φ_i(q)`.
    fn effective_kernel(&self, p: Self::Point, q: Self::Point) -> Result<f64> {
        let a = self.eval_basis(p)?;
        let b = self.eval_basis(q)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
    }
}
