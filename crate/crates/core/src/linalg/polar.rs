//! Orthogonalization: exact polar factors through the SVD and the
//! Newton-Schulz cubic iteration that approximates them.

use super::matrix::Matrix;
use super::svd::svd;
use crate::error::{Error, Result};

/// Relative threshold under which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Orthogonal (polar) factor `U V^T` of `A`.
///
/// Singular directions with `sigma <= RANK_TOL * sigma_max` are dropped, so
/// the factor is zero on the numerical null space: `||O||_F^2` equals the
/// numerical rank of `A`, and for full-column-rank `A` (m >= n) `O^T O = I`.
/// `<A, O>` equals the nuclear norm of `A` either way.
pub fn orthogonal_factor(a: &Matrix) -> Matrix {
    let r = svd(a);
    let sigma_max = r.sigma.first().copied().unwrap_or(0.0);
    let thresh = RANK_TOL * sigma_max;
    let (m, n) = a.shape();
    let mut out = Matrix::zeros(m, n);
    for (j, &s) in r.sigma.iter().enumerate() {
        if s <= thresh {
            break; // sigma is sorted, the rest are below threshold too
        }
        for i in 0..m {
            let uij = r.u[(i, j)];
            if uij == 0.0 {
                continue;
            }
            for k in 0..n {
                out[(i, k)] += uij * r.v[(k, j)];
            }
        }
    }
    out
}

/// Sum of singular values.
pub fn nuclear_norm(a: &Matrix) -> f64 {
    svd(a).sigma.iter().sum()
}

/// Newton-Schulz approximation of the orthogonal factor: pre-scales by the
/// Frobenius norm (so all singular values lie in (0, 1]) and runs `iters`
/// steps of the cubic map `X <- 1.5 X - 0.5 X X^T X`.
pub fn newton_schulz(a: &Matrix, iters: usize) -> Result<Matrix> {
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(newton_schulz_iterate(&a.scale(1.0 / norm), iters))
}

/// The raw cubic recursion without pre-scaling. Converges to the polar
/// factor when the singular values of `x0` lie in `(0, sqrt(3))`.
pub fn newton_schulz_iterate(x0: &Matrix, iters: usize) -> Matrix {
    let mut x = x0.clone();
    for _ in 0..iters {
        let xxt = x.matmul(&x.transpose());
        x = x.scale(1.5).sub(&xxt.matmul(&x).scale(0.5));
    }
    x
}
