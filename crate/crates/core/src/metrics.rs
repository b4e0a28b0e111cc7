//! Stationarity and theory-facing measurements over completed runs:
//! trajectory summaries, power-law rate fitting, the estimator-error
//! envelope, and the spectral-tail ratio used to check the low-rank
//! momentum assumption.

use crate::error::{Error, Result};
use crate::optimizer::{OptimizerConfig, StepRecord};
use crate::rsvd::tail_energy;

/// Derived per-run quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Mean of the nuclear gradient norms over the trajectory — the
    /// quantity whose decay rate the convergence bounds control.
    pub avg_nuclear: f64,
    pub min_frobenius: f64,
    pub final_loss: f64,
}

/// A completed run: config snapshot, per-step records, and derived fields.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: OptimizerConfig,
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    pub rho_hat: Option<f64>,
}

impl RunRecord {
    pub fn new(config: OptimizerConfig, records: Vec<StepRecord>) -> Result<Self> {
        let summary = summarize(&records)?;
        Ok(Self {
            config,
            records,
            summary,
            rho_hat: None,
        })
    }
}

/// Reduces a trajectory to its derived fields. Rejects empty input.
pub fn summarize(records: &[StepRecord]) -> Result<RunSummary> {
    if records.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot summarize an empty trajectory".into(),
        ));
    }
    let avg_nuclear =
        records.iter().map(|r| r.grad_nuclear).sum::<f64>() / records.len() as f64;
    let min_frobenius = records
        .iter()
        .map(|r| r.grad_frobenius)
        .fold(f64::INFINITY, f64::min);
    Ok(RunSummary {
        avg_nuclear,
        min_frobenius,
        final_loss: records.last().unwrap().loss,
    })
}

/// Least-squares fit of `log(avg_nuclear)` against `log(T)`.
#[derive(Debug, Clone)]
pub struct RateFit {
    /// `(T, avg_nuclear)` pairs the fit was computed from.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits a decay exponent to `(T, avg_nuclear)` points on a log-log scale.
/// Requires at least three distinct horizons.
pub fn fit_rate_points(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut horizons: Vec<f64> = points.iter().map(|p| p.0).collect();
    horizons.sort_by(|a, b| a.partial_cmp(b).unwrap());
    horizons.dedup();
    if horizons.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs >= 3 distinct horizons, got {}",
            horizons.len()
        )));
    }
    if points.iter().any(|&(t, y)| t <= 0.0 || y <= 0.0) {
        return Err(Error::InvalidParameter(
            "rate fit needs positive horizons and averages".into(),
        ));
    }

    let logs: Vec<(f64, f64)> = points.iter().map(|&(t, y)| (t.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

/// Groups runs by horizon, averages their `avg_nuclear` per horizon, and
/// fits the decay exponent.
pub fn fit_rate(runs: &[RunRecord]) -> Result<RateFit> {
    let mut grouped: Vec<(usize, f64, usize)> = Vec::new();
    for run in runs {
        let t = run.config.horizon;
        match grouped.iter_mut().find(|g| g.0 == t) {
            Some(g) => {
                g.1 += run.summary.avg_nuclear;
                g.2 += 1;
            }
            None => grouped.push((t, run.summary.avg_nuclear, 1)),
        }
    }
    let points: Vec<(f64, f64)> = grouped
        .iter()
        .map(|&(t, sum, count)| (t as f64, sum / count as f64))
        .collect();
    fit_rate_points(&points)
}

/// The estimator-error envelope for the dense STORM recursion under
/// L-smoothness:
/// `(1-beta)^t sigma + sqrt(beta/(2-beta)) sigma
///  + sqrt((1-beta)^2 / ((2-beta) beta)) L eta r`.
pub fn storm_error_envelope(beta: f64, eta: f64, sigma: f64, l: f64, r: f64, t: usize) -> f64 {
    let decay = (1.0 - beta).powi(t as i32) * sigma;
    let noise_floor = (beta / (2.0 - beta)).sqrt() * sigma;
    let drift = ((1.0 - beta).powi(2) / ((2.0 - beta) * beta)).sqrt() * l * eta * r;
    decay + noise_floor + drift
}

/// Empirical spectral-tail ratio: `max_t tail_energy(sigma_t, r_hat) /
/// grad_norm_t`, skipping near-stationary steps (`grad norm <= 1e-12`)
/// where the ratio is 0/0.
pub fn rho_hat(
    momentum_spectra: &[Vec<f64>],
    grad_norms: &[f64],
    r_hat: usize,
) -> Result<f64> {
    if momentum_spectra.len() != grad_norms.len() {
        return Err(Error::InvalidParameter(format!(
            "length mismatch: {} spectra vs {} gradient norms",
            momentum_spectra.len(),
            grad_norms.len()
        )));
    }
    let mut best: f64 = 0.0;
    for (spectrum, &norm) in momentum_spectra.iter().zip(grad_norms) {
        if norm <= 1e-12 {
            continue;
        }
        best = best.max(tail_energy(spectrum, r_hat) / norm);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: usize, loss: f64, fro: f64, nuc: f64) -> StepRecord {
        StepRecord {
            t,
            loss,
            grad_frobenius: fro,
            grad_nuclear: nuc,
            estimator_error: 0.0,
            state_elements: 0,
            wall_ms: 0.0,
            momentum_sigma: None,
            iterate: None,
        }
    }

    #[test]
    fn summarize_single_record() {
        let s = summarize(&[record(0, 1.5, 1.0, 2.0)]).unwrap();
        assert_eq!(s.avg_nuclear, 2.0);
        assert_eq!(s.min_frobenius, 1.0);
        assert_eq!(s.final_loss, 1.5);
    }

    #[test]
    fn summarize_constant_trajectory() {
        let records: Vec<StepRecord> = (0..5).map(|t| record(t, 0.3, 0.7, 1.1)).collect();
        let s = summarize(&records).unwrap();
        assert!((s.avg_nuclear - 1.1).abs() < 1e-15);
        assert_eq!(s.min_frobenius, 0.7);
    }

    #[test]
    fn summarize_matches_independent_mean() {
        let mut rng = crate::linalg::Rng::seed_from_u64(40);
        let records: Vec<StepRecord> = (0..100)
            .map(|t| {
                record(
                    t,
                    rng.next_f64(),
                    rng.next_f64() + 0.1,
                    rng.next_f64() + 0.1,
                )
            })
            .collect();
        let s = summarize(&records).unwrap();
        // re-summation with a different accumulation order
        let mut sum = 0.0;
        for r in records.iter().rev() {
            sum += r.grad_nuclear;
        }
        assert!((s.avg_nuclear - sum / 100.0).abs() <= 1e-12);
        for r in &records {
            assert!(s.min_frobenius <= r.grad_frobenius);
        }
    }

    #[test]
    fn summarize_rejects_empty() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summarize_avg_fields_are_permutation_invariant() {
        let records = vec![
            record(0, 1.0, 0.9, 2.0),
            record(1, 0.5, 0.4, 1.0),
            record(2, 0.25, 0.2, 0.5),
        ];
        let reversed: Vec<StepRecord> = records.iter().rev().cloned().collect();
        let a = summarize(&records).unwrap();
        let b = summarize(&reversed).unwrap();
        assert_eq!(a.avg_nuclear, b.avg_nuclear);
        assert_eq!(a.min_frobenius, b.min_frobenius);
        // final_loss is t-indexed and must follow the ordering
        assert_eq!(a.final_loss, 0.25);
        assert_eq!(b.final_loss, 1.0);
    }

    #[test]
    fn exact_power_law_recovers_slope() {
        let points: Vec<(f64, f64)> = [300.0, 3000.0, 30000.0]
            .iter()
            .map(|&t: &f64| (t, 2.5 * t.powf(-1.0 / 3.0)))
            .collect();
        let fit = fit_rate_points(&points).unwrap();
        assert!((fit.slope - (-1.0 / 3.0)).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_points_give_zero_slope() {
        let points = vec![(10.0, 4.0), (100.0, 4.0), (1000.0, 4.0)];
        let fit = fit_rate_points(&points).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn degenerate_horizons_rejected() {
        let points = vec![(10.0, 1.0), (10.0, 2.0), (10.0, 3.0)];
        assert!(fit_rate_points(&points).is_err());
        assert!(fit_rate_points(&[(10.0, 1.0), (20.0, 0.9)]).is_err());
    }

    #[test]
    fn envelope_noise_free_reduction() {
        let beta = 0.3;
        let (eta, l, r) = (0.01, 2.0, 4.0);
        let v = storm_error_envelope(beta, eta, 0.0, l, r, 17);
        let drift = ((1.0 - beta) * (1.0 - beta) / ((2.0 - beta) * beta)).sqrt() * l * eta * r;
        assert!((v - drift).abs() < 1e-15);
    }

    #[test]
    fn envelope_beta_near_one_approaches_sigma() {
        let sigma = 0.7;
        let v = storm_error_envelope(0.999, 0.01, sigma, 1.0, 4.0, 50);
        assert!((v - sigma).abs() < 0.05 * sigma, "{v} vs {sigma}");
    }

    #[test]
    fn envelope_frozen_value() {
        // beta=0.5, sigma=1, L=1, eta=0.01, r=4, t=10:
        // 0.5^10 + sqrt(1/3) + sqrt(1/3)*0.04 = 0.6014208424572107
        let v = storm_error_envelope(0.5, 0.01, 1.0, 1.0, 4.0, 10);
        assert!((v - 0.6014208424572107).abs() < 1e-15, "{v}");
    }

    #[test]
    fn rho_hat_cases() {
        // spectra with no tail beyond r_hat
        let rho = rho_hat(&[vec![3.0, 0.0], vec![1.0, 0.0]], &[1.0, 2.0], 1).unwrap();
        assert_eq!(rho, 0.0);

        // single step: tail of (2,1) past r_hat=1 is 1, grad norm 2
        let rho = rho_hat(&[vec![2.0, 1.0]], &[2.0], 1).unwrap();
        assert!((rho - 0.5).abs() < 1e-15);

        // near-stationary steps are skipped
        let rho = rho_hat(&[vec![2.0, 1.0]], &[1e-13], 1).unwrap();
        assert_eq!(rho, 0.0);

        assert!(rho_hat(&[vec![1.0]], &[1.0, 2.0], 1).is_err());
    }
}
