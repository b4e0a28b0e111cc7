//! Optimizer step loops: Muon (orthogonalized heavy-ball momentum) and the
//! LiMuon variants (STORM momentum, dense or low-rank-compressed), with the
//! learning-rate/momentum schedules the convergence analysis prescribes.
//!
//! One step orthogonalizes the current momentum `M_t` (exact polar factor or
//! Newton-Schulz), moves `W <- W - eta * O`, draws one fresh sample, and
//! updates the estimator with both gradients evaluated on that sample. Runs
//! are bit-reproducible for a fixed config: the sample stream and the sketch
//! stream are seeded separately so the dense and compressed variants see
//! identical sample sequences.

use crate::error::{Error, Result};
use crate::estimator::{
    classic_muon_update, compressed_storm_update, init_storm, storm_update, MomentumState,
    SamplePair,
};
use crate::linalg::{newton_schulz, nuclear_norm, orthogonal_factor, svd, Matrix, Rng};
use crate::objectives::StochasticOracle;
use crate::rsvd::RsvdParams;
use std::time::Instant;

/// Momentum buffers smaller than this are treated as zero and the parameter
/// update is skipped (the polar factor of 0 is arbitrary).
pub const ZERO_MOMENTUM_TOL: f64 = 1e-14;

/// Which update rule drives the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// Classic Muon: `B <- mu B + G`, step along the polar factor of B.
    Muon { mu: f64 },
    /// LiMuon option #1: dense STORM momentum.
    LiMuonOpt1,
    /// LiMuon option #2: STORM momentum compressed to rank `r_hat` between
    /// steps.
    LiMuonOpt2 { params: RsvdParams },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Muon { .. } => "muon",
            Variant::LiMuonOpt1 => "limuon1",
            Variant::LiMuonOpt2 { .. } => "limuon2",
        }
    }
}

/// Step-size/momentum schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// `(eta, beta) = (eta0, beta0)` for every horizon.
    Constant,
    /// `eta = eta0 * T^{-2/3}`, `beta = clamp(beta0 * T^{-2/3})` — the
    /// choice that yields the `O(T^{-1/3})` stationarity decay.
    TwoThirdsPower,
}

/// How the momentum is orthogonalized at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orthogonalizer {
    ExactSvd,
    NewtonSchulz { iters: usize },
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub variant: Variant,
    /// Schedule constant `c_eta` (the step size itself under `Constant`).
    pub eta0: f64,
    /// Schedule constant `c_beta` (the momentum weight under `Constant`).
    pub beta0: f64,
    /// Horizon `T`.
    pub horizon: usize,
    pub schedule: ScheduleKind,
    pub orthogonalizer: Orthogonalizer,
    pub seed: u64,
    /// Record the singular values of `M_t` in each step record (needed for
    /// the spectral-tail diagnostics; off by default, it costs an SVD).
    pub record_spectra: bool,
    /// Record a snapshot of `W_t` in each step record (trajectory
    /// comparisons in tests; off by default).
    pub record_iterates: bool,
}

impl OptimizerConfig {
    /// Config with the default schedule constants
    /// `c_eta = 0.05 / sqrt(min(m, n))`, `c_beta = 1`.
    pub fn new(variant: Variant, m: usize, n: usize, horizon: usize, seed: u64) -> Self {
        Self {
            variant,
            eta0: 0.05 / (m.min(n) as f64).sqrt(),
            beta0: 1.0,
            horizon,
            schedule: ScheduleKind::TwoThirdsPower,
            orthogonalizer: Orthogonalizer::ExactSvd,
            seed,
            record_spectra: false,
            record_iterates: false,
        }
    }
}

/// Per-step measurements. `state_elements` counts the estimator state that
/// persists *after* the step's update — the quantity the memory claims are
/// about. `wall_ms` is the step's compute time; everything else is a pure
/// function of the trajectory.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub loss: f64,
    pub grad_frobenius: f64,
    pub grad_nuclear: f64,
    pub estimator_error: f64,
    pub state_elements: usize,
    pub wall_ms: f64,
    pub momentum_sigma: Option<Vec<f64>>,
    pub iterate: Option<Matrix>,
}

/// A run that had to stop.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Non-finite loss, gradient, or momentum at step `step`. Carries the
    /// records collected before the failure.
    #[error("run diverged at step {step}")]
    Diverged {
        step: usize,
        records: Vec<StepRecord>,
    },
    #[error(transparent)]
    Invalid(#[from] Error),
}

/// Effective `(eta, beta)` for a horizon of `t_total` steps.
pub fn schedule(config: &OptimizerConfig, t_total: usize) -> (f64, f64) {
    match config.schedule {
        ScheduleKind::Constant => (config.eta0, config.beta0),
        ScheduleKind::TwoThirdsPower => {
            let scale = (t_total.max(1) as f64).powf(-2.0 / 3.0);
            let eta = config.eta0 * scale;
            let beta = (config.beta0 * scale).clamp(1e-6, 1.0 - 1e-6);
            (eta, beta)
        }
    }
}

/// Elements of persistent optimizer state for an `m x n` parameter.
pub fn state_memory(config: &OptimizerConfig, m: usize, n: usize) -> usize {
    match &config.variant {
        Variant::Muon { .. } | Variant::LiMuonOpt1 => m * n,
        Variant::LiMuonOpt2 { params } => (m + n + 1) * params.r_hat(),
    }
}

fn orthogonalize(m: &Matrix, orth: Orthogonalizer) -> Result<Matrix> {
    match orth {
        Orthogonalizer::ExactSvd => Ok(orthogonal_factor(m)),
        Orthogonalizer::NewtonSchulz { iters } => newton_schulz(m, iters),
    }
}

/// One classic Muon step: `B <- mu B + G`, `W <- W - eta * O(B)`.
///
/// Skips the parameter update when the momentum is numerically zero.
pub fn muon_step(
    w: &Matrix,
    state: MomentumState,
    grad: &Matrix,
    eta: f64,
    orth: Orthogonalizer,
) -> Result<(Matrix, MomentumState)> {
    let state = classic_muon_update(state, grad)?;
    let b = state.dense();
    let w_next = if b.frobenius_norm() > ZERO_MOMENTUM_TOL {
        w.sub(&orthogonalize(&b, orth)?.scale(eta))
    } else {
        w.clone()
    };
    Ok((w_next, state))
}

/// Runs the configured optimizer for `config.horizon` steps from `w0`,
/// recording one `StepRecord` per step.
///
/// Divergence (non-finite loss, gradient, or momentum) aborts the run with
/// the offending step index; the records collected so far ride along in the
/// error.
pub fn limuon_run(
    config: &OptimizerConfig,
    oracle: &dyn StochasticOracle,
    w0: &Matrix,
) -> std::result::Result<Vec<StepRecord>, RunError> {
    let (m, n) = oracle.dims();
    if w0.shape() != (m, n) {
        return Err(RunError::Invalid(Error::InvalidParameter(format!(
            "w0 is {:?} but the oracle expects {:?}",
            w0.shape(),
            (m, n)
        ))));
    }
    if let Variant::LiMuonOpt2 { params } = &config.variant {
        let l = params.sketch_width();
        let limit = m.min(n);
        if l > limit {
            return Err(RunError::Invalid(Error::RankConstraint { l, limit }));
        }
    }

    let (eta, beta) = schedule(config, config.horizon);
    let mut sample_rng = Rng::seed_from_u64(config.seed);
    // Independent stream for the sketch matrices so option #1 and option #2
    // runs draw identical sample sequences.
    let mut sketch_rng = sample_rng.derive_stream();

    let mut w = w0.clone();
    let mut records: Vec<StepRecord> = Vec::with_capacity(config.horizon);

    match config.variant {
        Variant::Muon { mu } => {
            let mut state = MomentumState::classic_muon(m, n, mu)?;
            for t in 0..config.horizon {
                let start = Instant::now();
                let id = oracle.sample(&mut sample_rng);
                let grad = oracle.stochastic_grad(&w, &id);
                state = classic_muon_update(state, &grad)?;
                let momentum = state.dense();

                let mut record = measure(config, oracle, &w, &momentum, t, state.element_count());
                if !record_is_finite(&record) || !momentum.is_finite() {
                    record.wall_ms = elapsed_ms(start);
                    records.push(record);
                    return Err(RunError::Diverged { step: t, records });
                }

                if momentum.frobenius_norm() > ZERO_MOMENTUM_TOL {
                    let o = orthogonalize(&momentum, config.orthogonalizer)?;
                    w = w.sub(&o.scale(eta));
                }
                record.wall_ms = elapsed_ms(start);
                records.push(record);
            }
        }
        Variant::LiMuonOpt1 | Variant::LiMuonOpt2 { .. } => {
            let id0 = oracle.sample(&mut sample_rng);
            let mut state = init_storm(oracle.stochastic_grad(&w, &id0));
            // Dense M_t for the orthogonalization step; transient between
            // estimator updates for option #2, whose persistent state is
            // the factored form.
            let mut momentum = state.dense();

            for t in 0..config.horizon {
                let start = Instant::now();
                let mut record = measure(config, oracle, &w, &momentum, t, state.element_count());
                if !record_is_finite(&record) || !momentum.is_finite() {
                    record.wall_ms = elapsed_ms(start);
                    records.push(record);
                    return Err(RunError::Diverged { step: t, records });
                }

                let w_next = if momentum.frobenius_norm() > ZERO_MOMENTUM_TOL {
                    let o = orthogonalize(&momentum, config.orthogonalizer)?;
                    w.sub(&o.scale(eta))
                } else {
                    w.clone()
                };

                let id = oracle.sample(&mut sample_rng);
                let pair = SamplePair::new(
                    oracle.stochastic_grad(&w_next, &id),
                    oracle.stochastic_grad(&w, &id),
                );
                match config.variant {
                    Variant::LiMuonOpt1 => {
                        state = storm_update(state, &pair, beta)?;
                        momentum = state.dense();
                    }
                    Variant::LiMuonOpt2 { params } => {
                        let (next, dense) =
                            compressed_storm_update(state, &pair, beta, params, &mut sketch_rng)?;
                        state = next;
                        momentum = dense;
                    }
                    Variant::Muon { .. } => unreachable!(),
                }
                w = w_next;

                record.state_elements = state.element_count();
                record.wall_ms = elapsed_ms(start);
                records.push(record);
            }
        }
    }

    Ok(records)
}

fn measure(
    config: &OptimizerConfig,
    oracle: &dyn StochasticOracle,
    w: &Matrix,
    momentum: &Matrix,
    t: usize,
    state_elements: usize,
) -> StepRecord {
    let full = oracle.full_grad(w);
    // A non-finite gradient means the run is about to be reported as
    // diverged; skip the decompositions, which assume finite input.
    let finite = full.is_finite() && momentum.is_finite();
    StepRecord {
        t,
        loss: oracle.loss(w),
        grad_frobenius: full.frobenius_norm(),
        grad_nuclear: if finite { nuclear_norm(&full) } else { f64::NAN },
        estimator_error: momentum.sub(&full).frobenius_norm(),
        state_elements,
        wall_ms: 0.0,
        momentum_sigma: (config.record_spectra && finite).then(|| svd(momentum).sigma),
        iterate: config.record_iterates.then(|| w.clone()),
    }
}

fn record_is_finite(r: &StepRecord) -> bool {
    r.loss.is_finite() && r.grad_frobenius.is_finite() && r.grad_nuclear.is_finite()
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::objectives::NoisyQuadratic;

    fn quadratic(m: usize, n: usize, num: usize, noise: f64, seed: u64) -> NoisyQuadratic {
        let mut rng = Rng::seed_from_u64(seed);
        NoisyQuadratic::new(m, n, num, noise, &mut rng)
    }

    fn config(variant: Variant, m: usize, n: usize, horizon: usize, seed: u64) -> OptimizerConfig {
        OptimizerConfig::new(variant, m, n, horizon, seed)
    }

    #[test]
    fn two_thirds_power_schedule_values() {
        let mut cfg = config(Variant::LiMuonOpt1, 4, 4, 1000, 0);
        cfg.eta0 = 1.0;
        cfg.beta0 = 1.0;
        let (eta, beta) = schedule(&cfg, 1000);
        assert!((eta - 0.01).abs() < 1e-15, "1000^(-2/3) = 0.01, got {eta}");
        assert!((beta - 0.01).abs() < 1e-15);
    }

    #[test]
    fn constant_schedule_passthrough() {
        let mut cfg = config(Variant::LiMuonOpt1, 4, 4, 123, 0);
        cfg.schedule = ScheduleKind::Constant;
        cfg.eta0 = 0.001;
        cfg.beta0 = 0.05;
        assert_eq!(schedule(&cfg, 99999), (0.001, 0.05));
    }

    #[test]
    fn beta_clamped_below_one() {
        let mut cfg = config(Variant::LiMuonOpt1, 4, 4, 8, 0);
        cfg.beta0 = 10.0;
        let (_, beta) = schedule(&cfg, 8);
        assert!(beta < 1.0);
        assert_eq!(beta, 1.0 - 1e-6);
    }

    #[test]
    fn schedule_monotone_in_horizon() {
        let cfg = config(Variant::LiMuonOpt1, 4, 4, 10, 0);
        let (e1, b1) = schedule(&cfg, 100);
        let (e2, b2) = schedule(&cfg, 1000);
        assert!(e2 < e1);
        assert!(b2 < b1);
    }

    #[test]
    fn muon_step_length_on_full_rank_momentum() {
        let mut rng = Rng::seed_from_u64(12);
        let w = gaussian_matrix(6, 4, &mut rng);
        let grad = gaussian_matrix(6, 4, &mut rng);
        let state = MomentumState::classic_muon(6, 4, 0.9).unwrap();
        let eta = 0.05;
        let (w_next, _) = muon_step(&w, state, &grad, eta, Orthogonalizer::ExactSvd).unwrap();
        let step_len = w_next.sub(&w).frobenius_norm();
        assert!((step_len - eta * 2.0).abs() <= 1e-8, "||UV^T||_F = sqrt(4)");
    }

    #[test]
    fn muon_step_skips_on_zero_momentum() {
        let w = Matrix::identity(3);
        let grad = Matrix::zeros(3, 3);
        let state = MomentumState::classic_muon(3, 3, 0.0).unwrap();
        let (w_next, _) = muon_step(&w, state, &grad, 0.1, Orthogonalizer::ExactSvd).unwrap();
        assert_eq!(w_next, w);
    }

    #[test]
    fn empty_horizon_returns_no_records() {
        let oracle = quadratic(3, 3, 2, 0.1, 1);
        let cfg = config(Variant::LiMuonOpt1, 3, 3, 0, 7);
        let records = limuon_run(&cfg, &oracle, &Matrix::zeros(3, 3)).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let oracle = quadratic(5, 4, 6, 0.2, 2);
        let mut cfg = config(
            Variant::LiMuonOpt2 {
                params: RsvdParams::new(2, 2).unwrap(),
            },
            5,
            4,
            40,
            99,
        );
        cfg.record_spectra = true;
        let w0 = gaussian_matrix(5, 4, &mut Rng::seed_from_u64(3));
        let r1 = limuon_run(&cfg, &oracle, &w0).unwrap();
        let r2 = limuon_run(&cfg, &oracle, &w0).unwrap();
        assert_eq!(r1.len(), r2.len());
        for (a, b) in r1.iter().zip(&r2) {
            assert_eq!(a.loss, b.loss);
            assert_eq!(a.grad_frobenius, b.grad_frobenius);
            assert_eq!(a.grad_nuclear, b.grad_nuclear);
            assert_eq!(a.estimator_error, b.estimator_error);
            assert_eq!(a.momentum_sigma, b.momentum_sigma);
        }
    }

    #[test]
    fn step_geometry_bound_holds() {
        let oracle = quadratic(6, 3, 4, 0.3, 4);
        let mut cfg = config(Variant::LiMuonOpt1, 6, 3, 50, 11);
        cfg.record_iterates = true;
        let w0 = gaussian_matrix(6, 3, &mut Rng::seed_from_u64(5));
        let (eta, _) = schedule(&cfg, cfg.horizon);
        let records = limuon_run(&cfg, &oracle, &w0).unwrap();
        for pair in records.windows(2) {
            let step = pair[1]
                .iterate
                .as_ref()
                .unwrap()
                .sub(pair[0].iterate.as_ref().unwrap())
                .frobenius_norm();
            assert!(step <= eta * 3.0_f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn zero_variance_quadratic_converges() {
        // Deterministic quadratic: the gradient estimate is exact, so the
        // run must shrink the gradient norm substantially.
        let oracle = quadratic(8, 8, 1, 0.0, 6);
        let mut cfg = config(Variant::LiMuonOpt1, 8, 8, 500, 13);
        cfg.eta0 = 0.5; // covers the start distance within the horizon
        let w_star = oracle.constants().w_star.clone().unwrap();
        let dir = gaussian_matrix(8, 8, &mut Rng::seed_from_u64(14));
        let w0 = w_star.add(&dir.scale(1.0 / dir.frobenius_norm()));
        let records = limuon_run(&cfg, &oracle, &w0).unwrap();
        let first = records.first().unwrap().grad_frobenius;
        let last = records.last().unwrap().grad_frobenius;
        assert!(
            last < first / 10.0,
            "grad norm {first} -> {last} did not drop 10x"
        );
    }

    #[test]
    fn opt2_matches_opt1_on_low_rank_problem() {
        use crate::objectives::LowRankTarget;
        let mut rng = Rng::seed_from_u64(15);
        let oracle = LowRankTarget::new(12, 6, 2, 5, 0.1, &mut rng);
        let w0 = oracle.in_subspace_start(0.8, &mut rng);

        let mut cfg1 = config(Variant::LiMuonOpt1, 12, 6, 60, 21);
        cfg1.record_iterates = true;
        let mut cfg2 = cfg1.clone();
        cfg2.variant = Variant::LiMuonOpt2 {
            params: RsvdParams::new(4, 2).unwrap(),
        };

        let r1 = limuon_run(&cfg1, &oracle, &w0).unwrap();
        let r2 = limuon_run(&cfg2, &oracle, &w0).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            let dist = a
                .iterate
                .as_ref()
                .unwrap()
                .sub(b.iterate.as_ref().unwrap())
                .frobenius_norm();
            assert!(dist <= 1e-6, "step {} diverged by {dist}", a.t);
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        // Orthogonalized steps have bounded length, so divergence needs a
        // step size big enough to overflow the quartic loss outright.
        use crate::objectives::QuarticOracle;
        let mut rng = Rng::seed_from_u64(16);
        let center = Matrix::zeros(3, 3);
        let oracle = QuarticOracle::new(3, 3, center, 1, 0.0, &mut rng);
        let mut cfg = config(Variant::LiMuonOpt1, 3, 3, 10_000, 1);
        cfg.schedule = ScheduleKind::Constant;
        cfg.eta0 = 1e80;
        cfg.beta0 = 0.9;
        let w0 = Matrix::identity(3);
        match limuon_run(&cfg, &oracle, &w0) {
            Err(RunError::Diverged { step, records }) => {
                assert_eq!(records.len(), step + 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn state_memory_accounting() {
        let cfg1 = config(Variant::LiMuonOpt1, 64, 32, 1, 0);
        assert_eq!(state_memory(&cfg1, 64, 32), 2048);
        let cfg2 = config(
            Variant::LiMuonOpt2 {
                params: RsvdParams::new(8, 5).unwrap(),
            },
            64,
            32,
            1,
            0,
        );
        // compressed beats dense whenever r_hat < mn / (m + n + 1)
        assert_eq!(state_memory(&cfg2, 64, 32), 776);
    }
}
