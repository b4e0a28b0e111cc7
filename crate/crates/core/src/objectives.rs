//! Synthetic stochastic objectives with exact gradients, known stationary
//! points, and known smoothness constants, plus a finite-difference gradient
//! oracle for validation.
//!
//! All instances are finite sums `f(W) = (1/N) sum_i f(W; i)`, so
//! unbiasedness can be checked exhaustively. A drawn `SampleId` is stable:
//! evaluating the stochastic gradient at two different iterates with the
//! same id uses the same summand — the contract the STORM recursion depends
//! on.

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, Matrix, Rng};

/// Identifies one realization of the sampling noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleId {
    /// Member of a finite sum.
    Index(usize),
    /// Seed for generative noise (unused by the built-in oracles, kept for
    /// oracles whose sample space is not enumerable).
    Seed(u64),
}

/// Smoothness certificate attached to an oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    Lipschitz { l: f64 },
    Generalized { l0: f64, l1: f64 },
}

/// Problem constants exposed for tests and envelope evaluations.
#[derive(Debug, Clone)]
pub struct OracleConstants {
    pub smoothness: Smoothness,
    /// Bound on the stochastic-gradient standard deviation. Exact for the
    /// quadratic families; an empirical probe-region estimate for the
    /// quartic, which admits no global bound.
    pub sigma: f64,
    /// Exact minimum value, when known in closed form.
    pub f_star: Option<f64>,
    /// Exact minimizer, when known.
    pub w_star: Option<Matrix>,
    /// A valid lower bound on f (equals `f_star` when that is known).
    pub lower_bound: f64,
}

/// A stochastic first-order oracle over matrix parameters.
pub trait StochasticOracle {
    fn dims(&self) -> (usize, usize);

    /// Draws a sample id. The id must reproduce the same noise realization
    /// for every subsequent gradient evaluation.
    fn sample(&self, rng: &mut Rng) -> SampleId;

    fn stochastic_grad(&self, w: &Matrix, id: &SampleId) -> Matrix;

    fn full_grad(&self, w: &Matrix) -> Matrix;

    fn loss(&self, w: &Matrix) -> f64;

    fn constants(&self) -> &OracleConstants;

    /// Size of the finite sum (for exhaustive averaging in tests).
    fn num_samples(&self) -> usize;
}

fn index_of(id: &SampleId, n: usize) -> usize {
    match id {
        SampleId::Index(i) => {
            assert!(*i < n, "sample index {i} out of range (N = {n})");
            *i
        }
        SampleId::Seed(_) => panic!("finite-sum oracle expects SampleId::Index"),
    }
}

fn draw_index(n: usize, rng: &mut Rng) -> SampleId {
    // Modulo bias is negligible for desk-scale N against 2^64.
    SampleId::Index((rng.next_u64() % n as u64) as usize)
}

/// `f(W; i) = 1/2 ||W - A_i||_F^2` with `A_i = A + noise_scale * E_i`.
///
/// Exactly 1-Lipschitz-smooth; the minimizer is the target mean and the
/// variance constant is computable in closed form.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    targets: Vec<Matrix>,
    mean: Matrix,
    constants: OracleConstants,
}

impl NoisyQuadratic {
    pub fn new(m: usize, n: usize, num_samples: usize, noise_scale: f64, rng: &mut Rng) -> Self {
        assert!(num_samples >= 1);
        let base = gaussian_matrix(m, n, rng);
        let targets: Vec<Matrix> = (0..num_samples)
            .map(|_| base.add(&gaussian_matrix(m, n, rng).scale(noise_scale)))
            .collect();
        Self::from_targets(targets)
    }

    /// Builds the oracle from explicit targets.
    pub fn from_targets(targets: Vec<Matrix>) -> Self {
        assert!(!targets.is_empty());
        let (m, n) = targets[0].shape();
        let mut mean = Matrix::zeros(m, n);
        for t in &targets {
            assert_eq!(t.shape(), (m, n));
            mean = mean.add(t);
        }
        let mean = mean.scale(1.0 / targets.len() as f64);

        let sigma_sq = targets
            .iter()
            .map(|t| t.sub(&mean).frobenius_norm().powi(2))
            .sum::<f64>()
            / targets.len() as f64;
        // f(W*) = (1/2N) sum ||mean - A_i||^2 = sigma^2 / 2.
        let f_star = sigma_sq / 2.0;

        let constants = OracleConstants {
            smoothness: Smoothness::Lipschitz { l: 1.0 },
            sigma: sigma_sq.sqrt(),
            f_star: Some(f_star),
            w_star: Some(mean.clone()),
            lower_bound: f_star,
        };
        Self {
            targets,
            mean,
            constants,
        }
    }

    pub fn target_mean(&self) -> &Matrix {
        &self.mean
    }
}

impl StochasticOracle for NoisyQuadratic {
    fn dims(&self) -> (usize, usize) {
        self.mean.shape()
    }

    fn sample(&self, rng: &mut Rng) -> SampleId {
        draw_index(self.targets.len(), rng)
    }

    fn stochastic_grad(&self, w: &Matrix, id: &SampleId) -> Matrix {
        let i = index_of(id, self.targets.len());
        w.sub(&self.targets[i])
    }

    fn full_grad(&self, w: &Matrix) -> Matrix {
        w.sub(&self.mean)
    }

    fn loss(&self, w: &Matrix) -> f64 {
        self.targets
            .iter()
            .map(|t| 0.5 * w.sub(t).frobenius_norm().powi(2))
            .sum::<f64>()
            / self.targets.len() as f64
    }

    fn constants(&self) -> &OracleConstants {
        &self.constants
    }

    fn num_samples(&self) -> usize {
        self.targets.len()
    }
}

/// `f(W; i) = 1/4 ||W - A_i||_F^4` — generalized-smooth but not globally
/// L-smooth.
///
/// The Hessian norm at distance `d` from a target is `3 d^2`, while the
/// gradient norm is `d^3`, so `||H|| <= L0 + L1 ||grad||` holds everywhere
/// with `L1 = 1` and `L0 = max_d (3 d^2 - d^3) = 4`. No finite `L` bounds
/// the Hessian globally.
#[derive(Debug, Clone)]
pub struct QuarticOracle {
    targets: Vec<Matrix>,
    constants: OracleConstants,
}

impl QuarticOracle {
    pub fn new(
        m: usize,
        n: usize,
        center: Matrix,
        num_samples: usize,
        noise_scale: f64,
        rng: &mut Rng,
    ) -> Self {
        assert!(num_samples >= 1);
        assert_eq!(center.shape(), (m, n));
        let targets: Vec<Matrix> = (0..num_samples)
            .map(|_| center.add(&gaussian_matrix(m, n, rng).scale(noise_scale)))
            .collect();

        let exact_min = num_samples == 1;
        // The per-sample gradient variance grows with distance from the
        // targets, so no global bound exists. sigma is an analytic bound
        // valid on the ball of radius 2 around the center: each per-sample
        // gradient there has norm at most (2 + spread)^3, so the deviation
        // from the mean is at most twice that.
        let spread = targets
            .iter()
            .map(|t| t.sub(&center).frobenius_norm())
            .fold(0.0, f64::max);
        let sigma = 2.0 * (2.0 + spread).powi(3);

        let constants = OracleConstants {
            smoothness: Smoothness::Generalized { l0: 4.0, l1: 1.0 },
            sigma,
            f_star: if exact_min { Some(0.0) } else { None },
            w_star: if exact_min {
                Some(targets[0].clone())
            } else {
                None
            },
            lower_bound: 0.0,
        };
        Self { targets, constants }
    }
}

fn quartic_grad(w: &Matrix, target: &Matrix) -> Matrix {
    let diff = w.sub(target);
    let d_sq = diff.frobenius_norm().powi(2);
    diff.scale(d_sq)
}

fn mean_quartic_grad(targets: &[Matrix], w: &Matrix) -> Matrix {
    let (m, n) = w.shape();
    let mut acc = Matrix::zeros(m, n);
    for t in targets {
        acc = acc.add(&quartic_grad(w, t));
    }
    acc.scale(1.0 / targets.len() as f64)
}

impl StochasticOracle for QuarticOracle {
    fn dims(&self) -> (usize, usize) {
        self.targets[0].shape()
    }

    fn sample(&self, rng: &mut Rng) -> SampleId {
        draw_index(self.targets.len(), rng)
    }

    fn stochastic_grad(&self, w: &Matrix, id: &SampleId) -> Matrix {
        let i = index_of(id, self.targets.len());
        quartic_grad(w, &self.targets[i])
    }

    fn full_grad(&self, w: &Matrix) -> Matrix {
        mean_quartic_grad(&self.targets, w)
    }

    fn loss(&self, w: &Matrix) -> f64 {
        self.targets
            .iter()
            .map(|t| 0.25 * w.sub(t).frobenius_norm().powi(4))
            .sum::<f64>()
            / self.targets.len() as f64
    }

    fn constants(&self) -> &OracleConstants {
        &self.constants
    }

    fn num_samples(&self) -> usize {
        self.targets.len()
    }
}

/// Quadratic finite sum whose targets all live in a fixed rank-`true_rank`
/// matrix subspace: `A_i = U0 (S + noise_scale * C_i) V0^T` with centered
/// `C_i`, so the mean target is exactly rank `true_rank`.
///
/// Gradients, and hence the optimizer's momentum, concentrate near rank
/// `true_rank` along a trajectory; starting from an in-subspace iterate they
/// stay exactly within it, which makes low-rank compression lossless.
#[derive(Debug, Clone)]
pub struct LowRankTarget {
    inner: NoisyQuadratic,
    basis_u: Matrix,
    basis_v: Matrix,
    true_rank: usize,
}

impl LowRankTarget {
    pub fn new(
        m: usize,
        n: usize,
        true_rank: usize,
        num_samples: usize,
        noise_scale: f64,
        rng: &mut Rng,
    ) -> Self {
        assert!(true_rank >= 1 && true_rank <= m.min(n));
        assert!(num_samples >= 1);
        let basis_u = crate::linalg::qr_decompose(&gaussian_matrix(m, true_rank, rng))
            .expect("m >= true_rank")
            .q;
        let basis_v = crate::linalg::qr_decompose(&gaussian_matrix(n, true_rank, rng))
            .expect("n >= true_rank")
            .q;

        // Strengths in [1, 2], descending, keep the mean solidly rank-r.
        let mut strengths: Vec<f64> = (0..true_rank).map(|_| 1.0 + rng.next_f64()).collect();
        strengths.sort_by(|a, b| b.partial_cmp(a).unwrap());

        let mut coeffs: Vec<Matrix> = (0..num_samples)
            .map(|_| gaussian_matrix(true_rank, true_rank, rng))
            .collect();
        // Center the noise so the target mean is exactly the rank-r core.
        let mut mean_c = Matrix::zeros(true_rank, true_rank);
        for c in &coeffs {
            mean_c = mean_c.add(c);
        }
        let mean_c = mean_c.scale(1.0 / num_samples as f64);
        for c in &mut coeffs {
            *c = c.sub(&mean_c);
        }

        let targets: Vec<Matrix> = coeffs
            .iter()
            .map(|c| {
                let mut core = c.scale(noise_scale);
                for j in 0..true_rank {
                    core[(j, j)] += strengths[j];
                }
                basis_u.matmul(&core).matmul(&basis_v.transpose())
            })
            .collect();

        Self {
            inner: NoisyQuadratic::from_targets(targets),
            basis_u,
            basis_v,
            true_rank,
        }
    }

    pub fn true_rank(&self) -> usize {
        self.true_rank
    }

    /// Orthonormal bases of the target subspace; `U0 X V0^T` for any
    /// `true_rank x true_rank` block X stays inside it.
    pub fn basis(&self) -> (&Matrix, &Matrix) {
        (&self.basis_u, &self.basis_v)
    }

    /// An iterate displaced from the minimizer inside the target subspace.
    pub fn in_subspace_start(&self, distance: f64, rng: &mut Rng) -> Matrix {
        let block = gaussian_matrix(self.true_rank, self.true_rank, rng);
        let dir = self.basis_u.matmul(&block).matmul(&self.basis_v.transpose());
        let w_star = self.inner.target_mean();
        w_star.add(&dir.scale(distance / dir.frobenius_norm()))
    }
}

impl StochasticOracle for LowRankTarget {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    fn sample(&self, rng: &mut Rng) -> SampleId {
        self.inner.sample(rng)
    }

    fn stochastic_grad(&self, w: &Matrix, id: &SampleId) -> Matrix {
        self.inner.stochastic_grad(w, id)
    }

    fn full_grad(&self, w: &Matrix) -> Matrix {
        self.inner.full_grad(w)
    }

    fn loss(&self, w: &Matrix) -> f64 {
        self.inner.loss(w)
    }

    fn constants(&self) -> &OracleConstants {
        self.inner.constants()
    }

    fn num_samples(&self) -> usize {
        self.inner.num_samples()
    }
}

/// Central-difference gradient of the full loss, entry by entry.
pub fn finite_diff_grad(oracle: &dyn StochasticOracle, w: &Matrix, h: f64) -> Result<Matrix> {
    if h <= 0.0 {
        return Err(Error::InvalidParameter("step h must be positive".into()));
    }
    let (m, n) = w.shape();
    let mut grad = Matrix::zeros(m, n);
    let mut probe = w.clone();
    for i in 0..m {
        for j in 0..n {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let plus = oracle.loss(&probe);
            probe[(i, j)] = orig - h;
            let minus = oracle.loss(&probe);
            probe[(i, j)] = orig;
            grad[(i, j)] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grad)
}
