//! Gradient-estimator state machines: classic heavy-ball momentum, the
//! STORM variance-reduced estimator, and its low-rank-compressed variant.
//!
//! The STORM recursion is
//! `M_{t+1} = g(W_{t+1}; xi) + (1 - beta) * (M_t - g(W_t; xi))`
//! with both gradients evaluated on the *same* sample. The compressed
//! variant substitutes the factored reconstruction for `M_t`, forms the new
//! dense momentum, hands it back for the orthogonalization step, and stores
//! only the rank-`r_hat` factors between steps.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::rsvd::{reconstruct, rsvd, FactoredMomentum, RsvdParams};

/// Persistent estimator state. The element counts are the "state memory"
/// the optimizer variants differ on: dense variants store `m * n`, the
/// compressed variant `(m + n + 1) * r_hat`.
#[derive(Debug, Clone)]
pub enum MomentumState {
    /// Heavy-ball buffer `B <- mu * B + G` with `mu` in `[0, 1)`.
    ClassicMuon { b: Matrix, mu: f64 },
    /// Dense STORM momentum.
    StormDense { m: Matrix },
    /// Factored STORM momentum (between steps only the factors persist).
    StormCompressed {
        factors: FactoredMomentum,
        params: RsvdParams,
    },
}

impl MomentumState {
    /// Fresh classic-momentum state with a zero buffer.
    pub fn classic_muon(m: usize, n: usize, mu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&mu) {
            return Err(Error::InvalidParameter(format!(
                "momentum mu must lie in [0, 1), got {mu}"
            )));
        }
        Ok(Self::ClassicMuon {
            b: Matrix::zeros(m, n),
            mu,
        })
    }

    /// Elements persisted between steps.
    pub fn element_count(&self) -> usize {
        match self {
            Self::ClassicMuon { b, .. } => b.element_count(),
            Self::StormDense { m } => m.element_count(),
            Self::StormCompressed { factors, .. } => factors.element_count(),
        }
    }

    /// Dense view of the stored momentum (reconstructs the compressed
    /// variant).
    pub fn dense(&self) -> Matrix {
        match self {
            Self::ClassicMuon { b, .. } => b.clone(),
            Self::StormDense { m } => m.clone(),
            Self::StormCompressed { factors, .. } => reconstruct(factors),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::ClassicMuon { b, .. } => b.shape(),
            Self::StormDense { m } => m.shape(),
            Self::StormCompressed { factors, .. } => factors.dims(),
        }
    }
}

/// Pair of stochastic gradients evaluated on one shared sample: the new
/// iterate's gradient and the previous iterate's gradient.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub grad_new: Matrix,
    pub grad_old: Matrix,
}

impl SamplePair {
    pub fn new(grad_new: Matrix, grad_old: Matrix) -> Self {
        assert_eq!(
            grad_new.shape(),
            grad_old.shape(),
            "sample pair shape mismatch"
        );
        Self { grad_new, grad_old }
    }
}

/// `M_0 = g(W_0; xi_0)`. Both options start from the dense initial
/// gradient; option #2 compresses for the first time at the end of step 0.
pub fn init_storm(grad0: Matrix) -> MomentumState {
    MomentumState::StormDense { m: grad0 }
}

/// `B <- mu * B + G`.
pub fn classic_muon_update(state: MomentumState, grad: &Matrix) -> Result<MomentumState> {
    match state {
        MomentumState::ClassicMuon { b, mu } => {
            assert_eq!(b.shape(), grad.shape(), "gradient shape mismatch");
            Ok(MomentumState::ClassicMuon {
                b: b.scale(mu).add(grad),
                mu,
            })
        }
        _ => Err(Error::InvalidParameter(
            "classic_muon_update expects a ClassicMuon state".into(),
        )),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    // (0, 1]: beta = 1 is the memoryless SGD reduction, useful in tests;
    // beta = 0 never decays the correction term and is excluded.
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    Ok(())
}

/// Dense STORM update (option #1).
pub fn storm_update(state: MomentumState, pair: &SamplePair, beta: f64) -> Result<MomentumState> {
    check_beta(beta)?;
    match state {
        MomentumState::StormDense { m } => {
            assert_eq!(m.shape(), pair.grad_new.shape(), "momentum shape mismatch");
            let m_next = pair
                .grad_new
                .add(&m.sub(&pair.grad_old).scale(1.0 - beta));
            Ok(MomentumState::StormDense { m: m_next })
        }
        _ => Err(Error::InvalidParameter(
            "storm_update expects a StormDense state".into(),
        )),
    }
}

/// Compressed STORM update (option #2).
///
/// Reconstructs the stored factors (or takes the initial dense momentum
/// as-is), forms the dense `M_{t+1}`, and re-sketches it for storage.
/// Returns the new factored state together with the dense momentum the
/// optimizer's SVD step consumes; only the factors persist between steps.
pub fn compressed_storm_update(
    state: MomentumState,
    pair: &SamplePair,
    beta: f64,
    params: RsvdParams,
    rng: &mut Rng,
) -> Result<(MomentumState, Matrix)> {
    check_beta(beta)?;
    let m_hat = match state {
        MomentumState::StormDense { m } => m,
        MomentumState::StormCompressed { factors, .. } => reconstruct(&factors),
        MomentumState::ClassicMuon { .. } => {
            return Err(Error::InvalidParameter(
                "compressed_storm_update expects a STORM state".into(),
            ))
        }
    };
    assert_eq!(
        m_hat.shape(),
        pair.grad_new.shape(),
        "momentum shape mismatch"
    );
    let m_next = pair
        .grad_new
        .add(&m_hat.sub(&pair.grad_old).scale(1.0 - beta));
    let factors = rsvd(&m_next, params, rng)?;
    Ok((
        MomentumState::StormCompressed { factors, params },
        m_next,
    ))
}

/// `||M_t - grad||_F` — the estimator error `zeta_t` against a reference
/// (usually the exact full gradient).
pub fn estimator_error(state: &MomentumState, true_grad: &Matrix) -> f64 {
    state.dense().sub(true_grad).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    #[test]
    fn init_stores_gradient_exactly() {
        let mut rng = Rng::seed_from_u64(4);
        let g = gaussian_matrix(3, 4, &mut rng);
        let state = init_storm(g.clone());
        assert_eq!(state.dense(), g);
        assert_eq!(state.element_count(), 12);

        let zero = Matrix::zeros(2, 2);
        assert_eq!(init_storm(zero.clone()).dense(), zero);
    }

    #[test]
    fn classic_momentum_memoryless_when_mu_zero() {
        let mut rng = Rng::seed_from_u64(5);
        let g = gaussian_matrix(2, 3, &mut rng);
        let state = MomentumState::classic_muon(2, 3, 0.0).unwrap();
        let state = classic_muon_update(state, &g).unwrap();
        assert_eq!(state.dense(), g);
    }

    #[test]
    fn classic_momentum_geometric_series() {
        let g = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let mu = 0.9;
        let mut state = MomentumState::classic_muon(2, 2, mu).unwrap();
        let k = 25;
        for _ in 0..k {
            state = classic_muon_update(state, &g).unwrap();
        }
        // B_k = G * (1 - mu^k) / (1 - mu)
        let expected = g.scale((1.0 - mu.powi(k)) / (1.0 - mu));
        assert!(state.dense().sub(&expected).frobenius_norm() < 1e-12);
    }

    #[test]
    fn mu_one_is_rejected() {
        assert!(MomentumState::classic_muon(2, 2, 1.0).is_err());
        assert!(MomentumState::classic_muon(2, 2, -0.1).is_err());
    }

    #[test]
    fn storm_beta_one_reduces_to_sgd() {
        let mut rng = Rng::seed_from_u64(6);
        let m_prev = gaussian_matrix(3, 3, &mut rng);
        let pair = SamplePair::new(
            gaussian_matrix(3, 3, &mut rng),
            gaussian_matrix(3, 3, &mut rng),
        );
        let state = storm_update(init_storm(m_prev), &pair, 1.0).unwrap();
        assert_eq!(state.dense(), pair.grad_new);
    }

    #[test]
    fn storm_formula_against_elementwise_oracle() {
        let mut rng = Rng::seed_from_u64(7);
        let m = gaussian_matrix(4, 2, &mut rng);
        let g_new = gaussian_matrix(4, 2, &mut rng);
        let g_old = gaussian_matrix(4, 2, &mut rng);
        let beta = 0.5;

        let state = storm_update(
            init_storm(m.clone()),
            &SamplePair::new(g_new.clone(), g_old.clone()),
            beta,
        )
        .unwrap();
        let out = state.dense();
        for i in 0..4 {
            for j in 0..2 {
                let expected = g_new[(i, j)] + (1.0 - beta) * (m[(i, j)] - g_old[(i, j)]);
                assert!((out[(i, j)] - expected).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn storm_telescopes_on_noise_free_oracle() {
        // With g(.) deterministic and M_t = grad(W_t) exactly, the update
        // returns grad(W_{t+1}) exactly for any beta.
        let mut rng = Rng::seed_from_u64(8);
        let grad_t = gaussian_matrix(3, 3, &mut rng);
        let grad_next = gaussian_matrix(3, 3, &mut rng);
        let state = storm_update(
            init_storm(grad_t.clone()),
            &SamplePair::new(grad_next.clone(), grad_t),
            0.3,
        )
        .unwrap();
        assert!(state.dense().sub(&grad_next).frobenius_norm() < 1e-15);
    }

    #[test]
    fn compressed_update_is_exact_on_low_rank_momentum() {
        let mut rng = Rng::seed_from_u64(9);
        // Build rank-1 momentum and gradients that keep M_{t+1} rank <= 2.
        let u = gaussian_matrix(10, 1, &mut rng);
        let v = gaussian_matrix(8, 1, &mut rng);
        let m0 = u.matmul(&v.transpose());
        let u2 = gaussian_matrix(10, 1, &mut rng);
        let v2 = gaussian_matrix(8, 1, &mut rng);
        let delta = u2.matmul(&v2.transpose());

        let pair = SamplePair::new(m0.add(&delta), m0.clone());
        let params = RsvdParams::new(3, 2).unwrap();
        let (state, dense) =
            compressed_storm_update(init_storm(m0.clone()), &pair, 0.25, params, &mut rng)
                .unwrap();

        // M1 = g_new + 0.75*(M0 - g_old) = M0 + delta (exact, rank <= 2)
        let expected = m0.add(&delta);
        assert!(dense.sub(&expected).frobenius_norm() < 1e-12);
        assert!(state.dense().sub(&expected).frobenius_norm() <= 1e-8);
        assert_eq!(state.element_count(), (10 + 8 + 1) * 3);
    }

    #[test]
    fn compressed_state_memory_stays_factored() {
        let mut rng = Rng::seed_from_u64(10);
        let params = RsvdParams::new(2, 2).unwrap();
        let mut state = init_storm(gaussian_matrix(9, 7, &mut rng));
        for _ in 0..5 {
            let pair = SamplePair::new(
                gaussian_matrix(9, 7, &mut rng),
                gaussian_matrix(9, 7, &mut rng),
            );
            let (next, _dense) =
                compressed_storm_update(state, &pair, 0.5, params, &mut rng).unwrap();
            state = next;
            assert_eq!(state.element_count(), (9 + 7 + 1) * 2);
        }
    }

    #[test]
    fn estimator_error_zero_on_match() {
        let mut rng = Rng::seed_from_u64(11);
        let m = gaussian_matrix(4, 4, &mut rng);
        let state = init_storm(m.clone());
        assert_eq!(estimator_error(&state, &m), 0.0);
    }

    #[test]
    fn beta_zero_rejected() {
        let pair = SamplePair::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2));
        assert!(storm_update(init_storm(Matrix::zeros(2, 2)), &pair, 0.0).is_err());
    }
}
