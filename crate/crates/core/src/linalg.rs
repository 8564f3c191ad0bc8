//! Thin wrappers over the dense nalgebra decompositions that fix the ordering
//! (descending) the rest of the crate relies on.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
pub(crate) struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub(crate) fn symmetric_eigen(matrix: DMatrix<f64>) -> Result<SortedEigen> {
    let n = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix, f64::EPSILON, 0).ok_or(Error::NoConvergence {
        what: "symmetric eigensolver",
        iterations: 0,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SortedEigen { values, vectors })
}

/// Thin SVD `A = U diag(s) Vᵀ`, singular values non-increasing.
/// `u` is `rows × k`, `v` is `cols × k` with `k = min(rows, cols)`.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn thin_svd(matrix: DMatrix<f64>) -> Result<SortedSvd> {
    let svd = SVD::try_new(matrix, true, true, f64::EPSILON, 0).ok_or(Error::NoConvergence {
        what: "singular value decomposition",
        iterations: 0,
    })?;
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::NoConvergence {
            what: "singular vectors",
            iterations: 0,
        });
    };
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let v_sorted = DMatrix::from_fn(v_t.ncols(), k, |r, c| v_t[(order[c], r)]);
    Ok(SortedSvd {
        u: u_sorted,
        singular,
        v: v_sorted,
    })
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, &x| acc.max(x.abs()))
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Flips column signs so that each column's largest-magnitude entry is positive.
pub(crate) fn normalize_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut pivot = 0.0f64;
        for &x in col.iter() {
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
