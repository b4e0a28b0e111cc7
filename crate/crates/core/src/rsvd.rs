//! Randomized SVD producing rank-`r_hat` factored approximations, plus the
//! associated error-bound helpers.
//!
//! The sketch works on `l = r_hat + s` columns: draw a Gaussian test matrix
//! `Omega` (n x l), orthonormalize `Y = A * Omega`, decompose the small
//! projected matrix `B = Q^T A`, and lift the left factor back through `Q`.
//! The factors are then truncated to the leading `r_hat` singular triples
//! for storage, which is what makes the state-memory accounting
//! `(m + n + 1) * r_hat` instead of `m * n`.

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, qr_decompose, svd, Matrix, Rng};

/// Target rank and oversampling for the sketch. `s >= 2` is required since
/// the expected-error factor divides by `s - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsvdParams {
    r_hat: usize,
    s: usize,
}

impl RsvdParams {
    pub fn new(r_hat: usize, s: usize) -> Result<Self> {
        if r_hat < 1 {
            return Err(Error::InvalidParameter("r_hat must be >= 1".into()));
        }
        if s < 2 {
            return Err(Error::InvalidParameter(
                "oversampling s must be >= 2".into(),
            ));
        }
        Ok(Self { r_hat, s })
    }

    pub fn r_hat(&self) -> usize {
        self.r_hat
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Sketch width `l = r_hat + s`.
    pub fn sketch_width(&self) -> usize {
        self.r_hat + self.s
    }

    /// Expected-error inflation factor `(1 + r_hat / (s - 1))^{1/2}`.
    pub fn error_factor(&self) -> f64 {
        (1.0 + self.r_hat as f64 / (self.s - 1) as f64).sqrt()
    }
}

/// Rank-`r_hat` factored momentum `u_hat * diag(s_hat) * v_hat^T`.
///
/// `s_hat` is diagonal by construction and stored as a vector, so the
/// persistent element count is exactly `(m + n + 1) * r_hat`.
#[derive(Debug, Clone)]
pub struct FactoredMomentum {
    u_hat: Matrix,
    s_hat: Vec<f64>,
    v_hat: Matrix,
}

impl FactoredMomentum {
    pub fn new(u_hat: Matrix, s_hat: Vec<f64>, v_hat: Matrix) -> Result<Self> {
        if u_hat.cols() != s_hat.len() || v_hat.cols() != s_hat.len() {
            return Err(Error::InvalidParameter(
                "factor widths must match the singular value count".into(),
            ));
        }
        Ok(Self { u_hat, s_hat, v_hat })
    }

    pub fn u_hat(&self) -> &Matrix {
        &self.u_hat
    }

    pub fn s_hat(&self) -> &[f64] {
        &self.s_hat
    }

    pub fn v_hat(&self) -> &Matrix {
        &self.v_hat
    }

    /// Shape of the dense matrix the factors approximate.
    pub fn dims(&self) -> (usize, usize) {
        (self.u_hat.rows(), self.v_hat.rows())
    }

    pub fn rank(&self) -> usize {
        self.s_hat.len()
    }

    /// Stored elements: `(m + n + 1) * r_hat`.
    pub fn element_count(&self) -> usize {
        self.u_hat.element_count() + self.s_hat.len() + self.v_hat.element_count()
    }
}

/// Randomized SVD of `A`, truncated to `r_hat` triples.
///
/// Requires `r_hat + s <= min(m, n)`. The Gaussian test matrix is drawn
/// fresh from `rng` on every call.
pub fn rsvd(a: &Matrix, params: RsvdParams, rng: &mut Rng) -> Result<FactoredMomentum> {
    let (m, n) = a.shape();
    let l = params.sketch_width();
    let limit = m.min(n);
    if l > limit {
        return Err(Error::RankConstraint { l, limit });
    }

    let omega = gaussian_matrix(n, l, rng);
    let y = a.matmul(&omega);
    let q = qr_decompose(&y)?.q;
    let b = q.transpose().matmul(a);
    let small = svd(&b);
    let u_full = q.matmul(&small.u);

    let r_hat = params.r_hat();
    let mut u_hat = Matrix::zeros(m, r_hat);
    let mut v_hat = Matrix::zeros(n, r_hat);
    for j in 0..r_hat {
        for i in 0..m {
            u_hat[(i, j)] = u_full[(i, j)];
        }
        for i in 0..n {
            v_hat[(i, j)] = small.v[(i, j)];
        }
    }
    let s_hat = small.sigma[..r_hat].to_vec();

    FactoredMomentum::new(u_hat, s_hat, v_hat)
}

/// Densifies `u_hat * diag(s_hat) * v_hat^T`.
pub fn reconstruct(f: &FactoredMomentum) -> Matrix {
    let (m, _) = f.dims();
    let mut scaled = f.u_hat.clone();
    for j in 0..f.rank() {
        for i in 0..m {
            scaled[(i, j)] *= f.s_hat[j];
        }
    }
    scaled.matmul(&f.v_hat.transpose())
}

/// Expected Frobenius error bound for the rank-`r_hat` randomized SVD:
/// `(1 + r_hat/(s-1))^{1/2} * (sum_{j>r_hat} nu_j^2)^{1/2}`.
pub fn rsvd_error_bound(singular_values: &[f64], r_hat: usize, s: usize) -> Result<f64> {
    if s < 2 {
        return Err(Error::InvalidParameter(
            "oversampling s must be >= 2".into(),
        ));
    }
    if r_hat < 1 || r_hat > singular_values.len() {
        return Err(Error::InvalidParameter(format!(
            "r_hat must be in 1..={}, got {r_hat}",
            singular_values.len()
        )));
    }
    let factor = (1.0 + r_hat as f64 / (s - 1) as f64).sqrt();
    Ok(factor * tail_energy(singular_values, r_hat))
}

/// `(sum_{j > r_hat} nu_j^2)^{1/2}` — the spectral tail left out of a
/// rank-`r_hat` approximation.
pub fn tail_energy(singular_values: &[f64], r_hat: usize) -> f64 {
    if r_hat >= singular_values.len() {
        return 0.0;
    }
    singular_values[r_hat..]
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, qr_decompose};

    fn with_spectrum(m: usize, n: usize, sigma: &[f64], rng: &mut Rng) -> Matrix {
        let k = sigma.len();
        let u = qr_decompose(&gaussian_matrix(m, k, rng)).unwrap().q;
        let v = qr_decompose(&gaussian_matrix(n, k, rng)).unwrap().q;
        let mut scaled = u;
        for j in 0..k {
            for i in 0..m {
                scaled[(i, j)] *= sigma[j];
            }
        }
        scaled.matmul(&v.transpose())
    }

    #[test]
    fn exact_rank_one_recovery() {
        let mut rng = Rng::seed_from_u64(8);
        let u = gaussian_matrix(16, 1, &mut rng);
        let v = gaussian_matrix(12, 1, &mut rng);
        let a = u.matmul(&v.transpose());
        let params = RsvdParams::new(1, 2).unwrap();
        let f = rsvd(&a, params, &mut rng).unwrap();
        assert!(reconstruct(&f).sub(&a).frobenius_norm() <= 1e-8 * a.frobenius_norm());
    }

    #[test]
    fn exact_rank_three_recovery() {
        let mut rng = Rng::seed_from_u64(9);
        let a = with_spectrum(16, 12, &[2.0, 1.0, 0.5], &mut rng);
        let params = RsvdParams::new(3, 2).unwrap();
        let f = rsvd(&a, params, &mut rng).unwrap();
        assert!(reconstruct(&f).sub(&a).frobenius_norm() <= 1e-7);
        // Orthonormal factors and the exact storage count.
        let gram_u = f.u_hat().transpose().matmul(f.u_hat());
        assert!(gram_u.sub(&Matrix::identity(3)).frobenius_norm() <= 1e-8);
        let gram_v = f.v_hat().transpose().matmul(f.v_hat());
        assert!(gram_v.sub(&Matrix::identity(3)).frobenius_norm() <= 1e-8);
        assert_eq!(f.element_count(), (16 + 12 + 1) * 3);
    }

    #[test]
    fn reconstruct_simple_rank_one() {
        let u = Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let v = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let f = FactoredMomentum::new(u, vec![2.0], v).unwrap();
        let dense = reconstruct(&f);
        assert_eq!(dense[(0, 0)], 2.0);
        assert_eq!(dense[(1, 0)], 0.0);
        assert_eq!(f.element_count(), 2 + 1 + 1);
    }

    #[test]
    fn determinism_for_fixed_seed() {
        let mut rng = Rng::seed_from_u64(55);
        let a = gaussian_matrix(10, 9, &mut rng);
        let params = RsvdParams::new(3, 3).unwrap();
        let f1 = rsvd(&a, params, &mut Rng::seed_from_u64(77)).unwrap();
        let f2 = rsvd(&a, params, &mut Rng::seed_from_u64(77)).unwrap();
        assert_eq!(f1.u_hat(), f2.u_hat());
        assert_eq!(f1.s_hat(), f2.s_hat());
        assert_eq!(f1.v_hat(), f2.v_hat());
    }

    #[test]
    fn rejects_oversized_sketch() {
        let a = Matrix::zeros(6, 5);
        let params = RsvdParams::new(4, 2).unwrap();
        assert_eq!(
            rsvd(&a, params, &mut Rng::seed_from_u64(0)).unwrap_err(),
            Error::RankConstraint { l: 6, limit: 5 }
        );
    }

    #[test]
    fn params_validation() {
        assert!(RsvdParams::new(0, 3).is_err());
        assert!(RsvdParams::new(2, 1).is_err());
        assert!(RsvdParams::new(2, 2).is_ok());
    }

    #[test]
    fn error_bound_arithmetic() {
        // (1 + 1/1)^{1/2} * sqrt(1 + 0.25) = sqrt(2) * sqrt(1.25)
        let b = rsvd_error_bound(&[2.0, 1.0, 0.5], 1, 2).unwrap();
        assert!((b - 1.5811388300841898).abs() < 1e-12);

        // zero tail
        assert_eq!(rsvd_error_bound(&[3.0, 2.0, 0.0, 0.0], 2, 2).unwrap(), 0.0);

        // (1 + 2/2)^{1/2} * sqrt(2) = 2
        let b = rsvd_error_bound(&[1.0, 1.0, 1.0, 1.0], 2, 3).unwrap();
        assert!((b - 2.0).abs() < 1e-12);

        assert!(rsvd_error_bound(&[1.0], 1, 1).is_err());
    }

    #[test]
    fn tail_energy_cases() {
        assert!((tail_energy(&[3.0, 2.0, 1.0], 2) - 1.0).abs() < 1e-15);
        assert_eq!(tail_energy(&[3.0, 2.0, 1.0], 5), 0.0);
        assert!((tail_energy(&[2.0, 1.0, 0.5], 1) - 1.118033988749895).abs() < 1e-12);
        assert!((tail_energy(&[2.0, 1.0, 0.5], 0) - (4.0f64 + 1.0 + 0.25).sqrt()).abs() < 1e-12);
    }

    /// Monte-Carlo check of the expected-error bound on a geometric
    /// spectrum; the acceptance suite runs the full 200-seed version.
    #[test]
    fn expectation_bound_smoke() {
        let mut setup = Rng::seed_from_u64(4242);
        let sigma: Vec<f64> = (1..=24).map(|j| 2f64.powi(-j)).collect();
        let a = with_spectrum(32, 24, &sigma, &mut setup);
        let params = RsvdParams::new(4, 3).unwrap();

        let seeds = 60;
        let mut errs = Vec::with_capacity(seeds);
        for k in 0..seeds {
            let mut rng = Rng::seed_from_u64(9000 + k as u64);
            let f = rsvd(&a, params, &mut rng).unwrap();
            errs.push(reconstruct(&f).sub(&a).frobenius_norm());
        }
        let mean: f64 = errs.iter().sum::<f64>() / seeds as f64;
        let var: f64 =
            errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (seeds - 1) as f64;
        let stderr = (var / seeds as f64).sqrt();
        let bound = rsvd_error_bound(&sigma, 4, 3).unwrap();
        assert!(
            mean <= bound + 3.0 * stderr,
            "mean {mean} vs bound {bound} (+3se {})",
            bound + 3.0 * stderr
        );
    }
}
