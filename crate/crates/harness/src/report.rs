//! Reports: finite-difference gradient validation, rate fitting over result
//! files, and state-memory accounting.

use crate::config::ExperimentSpec;
use crate::csvio::read_csv;
use crate::error::HarnessError;
use limuon::linalg::{gaussian_matrix, Rng};
use limuon::metrics::fit_rate_points;
use limuon::objectives::finite_diff_grad;
use limuon::optimizer::state_memory;
use serde::Serialize;
use std::path::Path;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const GRADCHECK_STEP: f64 = 1e-5;

#[derive(Debug, Serialize)]
pub struct GradcheckReport {
    pub problem: String,
    pub probes: Vec<f64>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Finite-difference validation of the problem's full gradient at 5 seeded
/// probe points.
pub fn gradcheck(spec: &ExperimentSpec) -> Result<GradcheckReport, HarnessError> {
    spec.validate()?;
    let (oracle, w0) = spec.build_problem()?;
    let mut probe_rng = Rng::seed_from_u64(spec.problem.seed ^ 0x6772_6164_6368_6b21);

    let mut probes = Vec::with_capacity(5);
    for _ in 0..5 {
        let dir = gaussian_matrix(spec.problem.m, spec.problem.n, &mut probe_rng);
        let w = w0.add(&dir.scale(0.5 * spec.problem.start_distance / dir.frobenius_norm()));
        let fd = finite_diff_grad(oracle.as_ref(), &w, GRADCHECK_STEP)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let exact = oracle.full_grad(&w);
        let rel = fd.sub(&exact).frobenius_norm() / exact.frobenius_norm().max(1e-8);
        probes.push(rel);
    }
    let max_rel_error = probes.iter().copied().fold(0.0, f64::max);
    Ok(GradcheckReport {
        problem: spec.problem.kind.clone(),
        probes,
        max_rel_error,
        tolerance: GRADCHECK_TOLERANCE,
        pass: max_rel_error <= GRADCHECK_TOLERANCE,
    })
}

#[derive(Debug, Serialize)]
pub struct HorizonAverage {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub avg_nuclear: f64,
    pub runs: usize,
}

#[derive(Debug, Serialize)]
pub struct RateReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub per_horizon: Vec<HorizonAverage>,
    pub diverged_runs: usize,
}

/// Groups result rows by horizon, averages each run's nuclear gradient norm
/// and fits the log-log decay slope. Requires at least three distinct
/// horizons across the input files.
pub fn rate_report(files: &[impl AsRef<Path>]) -> Result<RateReport, HarnessError> {
    // (horizon, seed) -> (sum, count)
    let mut per_run: Vec<((usize, u64), (f64, usize))> = Vec::new();
    let mut diverged_runs = 0usize;
    for file in files {
        let parsed = read_csv(file.as_ref())?;
        diverged_runs += parsed.diverged_runs;
        for step in parsed.steps {
            let key = (step.horizon, step.seed);
            match per_run.iter_mut().find(|(k, _)| *k == key) {
                Some((_, acc)) => {
                    acc.0 += step.grad_nuc;
                    acc.1 += 1;
                }
                None => per_run.push((key, (step.grad_nuc, 1))),
            }
        }
    }

    // horizon -> (sum of run averages, run count)
    let mut per_horizon: Vec<(usize, f64, usize)> = Vec::new();
    for ((horizon, _), (sum, count)) in &per_run {
        let run_avg = sum / *count as f64;
        match per_horizon.iter_mut().find(|(h, _, _)| h == horizon) {
            Some((_, total, runs)) => {
                *total += run_avg;
                *runs += 1;
            }
            None => per_horizon.push((*horizon, run_avg, 1)),
        }
    }
    per_horizon.sort_by_key(|&(h, _, _)| h);

    if per_horizon.len() < 3 {
        return Err(HarnessError::InsufficientData(format!(
            "rate report needs >= 3 distinct horizons, found {}",
            per_horizon.len()
        )));
    }

    let points: Vec<(f64, f64)> = per_horizon
        .iter()
        .map(|&(h, total, runs)| (h as f64, total / runs as f64))
        .collect();
    let fit = fit_rate_points(&points).map_err(|e| HarnessError::InsufficientData(e.to_string()))?;

    Ok(RateReport {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        per_horizon: per_horizon
            .into_iter()
            .map(|(horizon, total, runs)| HorizonAverage {
                horizon,
                avg_nuclear: total / runs as f64,
                runs,
            })
            .collect(),
        diverged_runs,
    })
}

#[derive(Debug, Serialize)]
pub struct MemoryReport {
    pub m: usize,
    pub n: usize,
    pub variant: String,
    /// Elements the configured variant persists between steps.
    pub state_elements: usize,
    /// Dense momentum footprint `m * n` for comparison.
    pub dense_elements: usize,
    /// `state_elements / dense_elements`.
    pub ratio: f64,
}

/// State-memory accounting for the configured optimizer.
pub fn memory_report(spec: &ExperimentSpec) -> Result<MemoryReport, HarnessError> {
    spec.validate()?;
    let (m, n) = (spec.problem.m, spec.problem.n);
    let config = spec.build_optimizer_config(spec.optimizer.seed)?;
    let state_elements = state_memory(&config, m, n);
    let dense_elements = m * n;
    Ok(MemoryReport {
        m,
        n,
        variant: spec.optimizer.variant.clone(),
        state_elements,
        dense_elements,
        ratio: state_elements as f64 / dense_elements as f64,
    })
}
