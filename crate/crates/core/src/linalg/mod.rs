//! Self-contained dense linear algebra: matrix arithmetic, seeded Gaussian
//! sampling, Householder QR, one-sided Jacobi SVD, exact orthogonalization,
//! and the Newton-Schulz polar iteration.

mod matrix;
mod polar;
mod qr;
mod rng;
mod svd;

pub use matrix::{frobenius_norm, Matrix};
pub use polar::{newton_schulz, newton_schulz_iterate, nuclear_norm, orthogonal_factor, RANK_TOL};
pub use qr::{qr_decompose, QrResult};
pub use rng::{gaussian_matrix, Rng};
pub use svd::{svd, SvdResult};
