//! Experiment execution: one problem instance, `repeats` optimizer runs
//! with consecutive seeds, rows concatenated in seed order.

use crate::config::ExperimentSpec;
use crate::csvio::{write_csv_atomic, CsvRow};
use crate::error::HarnessError;
use limuon::optimizer::{limuon_run, RunError, StepRecord};
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct RunReport {
    pub path: PathBuf,
    pub rows_written: usize,
    pub diverged_runs: usize,
}

/// Runs the experiment and writes its CSV atomically to `out`.
///
/// Diverged runs truncate their row stream and append a terminal marker
/// row; the report counts them so the CLI can exit 4.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<RunReport, HarnessError> {
    spec.validate()?;
    let (oracle, w0) = spec.build_problem()?;
    let variant_name = spec.optimizer.variant.clone();

    let mut rows: Vec<CsvRow> = Vec::new();
    let mut diverged_runs = 0usize;

    for rep in 0..spec.repeats {
        let seed = spec.optimizer.seed.wrapping_add(rep as u64);
        let config = spec.build_optimizer_config(seed)?;
        let to_row = |r: &StepRecord| CsvRow::Step {
            experiment: spec.experiment.clone(),
            variant: variant_name.clone(),
            horizon: spec.optimizer.t,
            seed,
            t: r.t,
            loss: r.loss,
            grad_fro: r.grad_frobenius,
            grad_nuc: r.grad_nuclear,
            est_err: r.estimator_error,
            state_elems: r.state_elements,
            wall_ms: if spec.record_wall_time { r.wall_ms } else { 0.0 },
        };

        match limuon_run(&config, oracle.as_ref(), &w0) {
            Ok(records) => rows.extend(records.iter().map(to_row)),
            Err(RunError::Diverged { step, records }) => {
                rows.extend(records.iter().map(to_row));
                rows.push(CsvRow::Diverged {
                    experiment: spec.experiment.clone(),
                    variant: variant_name.clone(),
                    horizon: spec.optimizer.t,
                    seed,
                    t: step,
                });
                diverged_runs += 1;
            }
            Err(RunError::Invalid(e)) => return Err(HarnessError::Config(e.to_string())),
        }
    }

    let rows_written = rows.len();
    write_csv_atomic(out, &rows)?;
    Ok(RunReport {
        path: out.to_path_buf(),
        rows_written,
        diverged_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentSpec;

    fn minimal_spec(extra: &[&str]) -> ExperimentSpec {
        let base = r#"{
            "schema_version": 1,
            "experiment": "mini",
            "problem": {"kind": "noisy_quadratic", "m": 1, "n": 1, "num_samples": 2,
                        "noise_scale": 0.0, "seed": 3},
            "optimizer": {"variant": "limuon1", "T": 10, "seed": 0}
        }"#;
        let overrides: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        ExperimentSpec::from_json_with_overrides(base, &overrides).unwrap()
    }

    #[test]
    fn row_count_contract() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("mini.csv");
        let report = run_experiment(&minimal_spec(&[]), &out).unwrap();
        assert_eq!(report.rows_written, 10);
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), 11); // header + 10 data rows
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let spec = minimal_spec(&["repeats=3", "optimizer.variant=muon"]);
        let out1 = dir.path().join("a.csv");
        let out2 = dir.path().join("b.csv");
        run_experiment(&spec, &out1).unwrap();
        run_experiment(&spec, &out2).unwrap();
        assert_eq!(
            std::fs::read(&out1).unwrap(),
            std::fs::read(&out2).unwrap()
        );
    }

    #[test]
    fn diverged_run_truncates_with_marker() {
        let dir = tempfile::tempdir().unwrap();
        // A step size large enough to overflow the quartic loss.
        let spec = ExperimentSpec::from_json_with_overrides(
            r#"{
                "schema_version": 1,
                "experiment": "blowup",
                "problem": {"kind": "quartic", "m": 3, "n": 3, "num_samples": 1,
                            "noise_scale": 0.0, "seed": 1},
                "optimizer": {"variant": "limuon1", "T": 100, "seed": 0,
                              "schedule": "constant", "eta0": 1e80, "beta0": 0.9}
            }"#,
            &[],
        )
        .unwrap();
        let out = dir.path().join("blowup.csv");
        let report = run_experiment(&spec, &out).unwrap();
        assert_eq!(report.diverged_runs, 1);

        let text = std::fs::read_to_string(&out).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.contains(",diverged,"), "missing marker row: {last}");
        assert!(text.lines().count() < 102, "stream was not truncated");
    }

    #[test]
    fn seed_isolation() {
        // Rows for a given seed are identical whether the run executes
        // alone or as part of a sweep of repeats.
        let dir = tempfile::tempdir().unwrap();
        let sweep = minimal_spec(&["repeats=3"]);
        let single = minimal_spec(&["optimizer.seed=2"]);
        let out_sweep = dir.path().join("sweep.csv");
        let out_single = dir.path().join("single.csv");
        run_experiment(&sweep, &out_sweep).unwrap();
        run_experiment(&single, &out_single).unwrap();

        let sweep_text = std::fs::read_to_string(&out_sweep).unwrap();
        let single_text = std::fs::read_to_string(&out_single).unwrap();
        let sweep_seed2: Vec<&str> = sweep_text
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(3) == Some("2"))
            .collect();
        let single_rows: Vec<&str> = single_text.lines().skip(1).collect();
        assert_eq!(sweep_seed2, single_rows);
    }
}
