//! Experiment configuration: a single JSON document per experiment with a
//! versioned schema, strict about unknown keys, with dotted-path CLI
//! overrides applied before final validation.

use crate::error::HarnessError;
use limuon::linalg::{gaussian_matrix, Matrix, Rng};
use limuon::objectives::{LowRankTarget, NoisyQuadratic, QuarticOracle, StochasticOracle};
use limuon::optimizer::{OptimizerConfig, Orthogonalizer, ScheduleKind, Variant};
use limuon::rsvd::RsvdParams;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub experiment: String,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    #[serde(default)]
    pub output_path: Option<String>,
    /// Report measured per-step wall time in the CSV. Off by default so
    /// re-runs with identical configs stay byte-identical.
    #[serde(default)]
    pub record_wall_time: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// One of `noisy_quadratic`, `quartic`, `lowrank_target`.
    pub kind: String,
    pub m: usize,
    pub n: usize,
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    #[serde(default)]
    pub noise_scale: f64,
    /// Rank of the target subspace (`lowrank_target` only).
    #[serde(default)]
    pub true_rank: Option<usize>,
    /// Seed for problem construction and the starting iterate; independent
    /// of the optimizer seed so repeats share one problem instance.
    #[serde(default)]
    pub seed: u64,
    /// Frobenius distance of the starting iterate from the reference point.
    #[serde(default = "default_start_distance")]
    pub start_distance: f64,
    /// Start inside the target subspace (`lowrank_target` only), which
    /// keeps the momentum exactly low-rank along the run.
    #[serde(default)]
    pub in_subspace_start: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    /// One of `muon`, `limuon1`, `limuon2`.
    pub variant: String,
    /// Heavy-ball coefficient (`muon` only).
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Compression rank (`limuon2` only).
    #[serde(default)]
    pub r_hat: Option<usize>,
    /// Oversampling (`limuon2` only).
    #[serde(default)]
    pub s: Option<usize>,
    /// Schedule constant c_eta; defaults to `0.05 / sqrt(min(m, n))`.
    #[serde(default)]
    pub eta0: Option<f64>,
    /// Schedule constant c_beta; defaults to 1.
    #[serde(default)]
    pub beta0: Option<f64>,
    /// Horizon.
    #[serde(rename = "T")]
    pub t: usize,
    /// One of `constant`, `two_thirds_power`.
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// One of `exact_svd`, `newton_schulz`.
    #[serde(default = "default_orthogonalizer")]
    pub orthogonalizer: String,
    #[serde(default = "default_ns_iters")]
    pub ns_iters: usize,
    #[serde(default)]
    pub seed: u64,
    /// Record momentum spectra per step (needed for spectral-tail reports).
    #[serde(default)]
    pub record_spectra: bool,
}

fn default_repeats() -> u32 {
    1
}

fn default_num_samples() -> usize {
    8
}

fn default_start_distance() -> f64 {
    1.0
}

fn default_mu() -> f64 {
    0.95
}

fn default_schedule() -> String {
    "two_thirds_power".into()
}

fn default_orthogonalizer() -> String {
    "exact_svd".into()
}

fn default_ns_iters() -> usize {
    30
}

impl ExperimentSpec {
    /// Parses a JSON document, applying `key=value` overrides (dotted paths,
    /// e.g. `optimizer.T=500`) before deserialization so unknown keys and
    /// type errors are caught uniformly.
    pub fn from_json_with_overrides(
        json: &str,
        overrides: &[String],
    ) -> Result<Self, HarnessError> {
        let mut value: serde_json::Value = serde_json::from_str(json)
            .map_err(|e| HarnessError::Config(format!("invalid JSON: {e}")))?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let spec: ExperimentSpec = serde_json::from_value(value)
            .map_err(|e| HarnessError::Config(format!("invalid experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.repeats < 1 {
            return Err(HarnessError::Config("repeats must be >= 1".into()));
        }
        if self.problem.m == 0 || self.problem.n == 0 {
            return Err(HarnessError::Config("dimensions must be positive".into()));
        }
        match self.problem.kind.as_str() {
            "noisy_quadratic" | "quartic" => {}
            "lowrank_target" => {
                let rank = self.problem.true_rank.ok_or_else(|| {
                    HarnessError::Config("lowrank_target requires problem.true_rank".into())
                })?;
                if rank == 0 || rank > self.problem.m.min(self.problem.n) {
                    return Err(HarnessError::Config(format!(
                        "true_rank {rank} out of range for {}x{}",
                        self.problem.m, self.problem.n
                    )));
                }
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown problem kind '{other}' (expected noisy_quadratic, quartic, or lowrank_target)"
                )))
            }
        }
        if self.problem.num_samples == 0 {
            return Err(HarnessError::Config("num_samples must be >= 1".into()));
        }
        // Building the optimizer config performs the variant checks
        // (r_hat + s <= min(m, n) among them).
        self.build_optimizer_config(self.optimizer.seed)?;
        Ok(())
    }

    /// Core optimizer config for one repeat (seeds differ per repeat).
    pub fn build_optimizer_config(&self, seed: u64) -> Result<OptimizerConfig, HarnessError> {
        let (m, n) = (self.problem.m, self.problem.n);
        let variant = match self.optimizer.variant.as_str() {
            "muon" => {
                if !(0.0..1.0).contains(&self.optimizer.mu) {
                    return Err(HarnessError::Config(format!(
                        "mu must lie in [0, 1), got {}",
                        self.optimizer.mu
                    )));
                }
                Variant::Muon {
                    mu: self.optimizer.mu,
                }
            }
            "limuon1" => Variant::LiMuonOpt1,
            "limuon2" => {
                let r_hat = self.optimizer.r_hat.ok_or_else(|| {
                    HarnessError::Config("limuon2 requires optimizer.r_hat".into())
                })?;
                let s = self
                    .optimizer
                    .s
                    .ok_or_else(|| HarnessError::Config("limuon2 requires optimizer.s".into()))?;
                let params = RsvdParams::new(r_hat, s)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                if params.sketch_width() > m.min(n) {
                    return Err(HarnessError::Config(format!(
                        "r_hat + s = {} exceeds min(m, n) = {}",
                        params.sketch_width(),
                        m.min(n)
                    )));
                }
                Variant::LiMuonOpt2 { params }
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown optimizer variant '{other}' (expected muon, limuon1, or limuon2)"
                )))
            }
        };
        let schedule = match self.optimizer.schedule.as_str() {
            "constant" => ScheduleKind::Constant,
            "two_thirds_power" => ScheduleKind::TwoThirdsPower,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown schedule '{other}' (expected constant or two_thirds_power)"
                )))
            }
        };
        let orthogonalizer = match self.optimizer.orthogonalizer.as_str() {
            "exact_svd" => Orthogonalizer::ExactSvd,
            "newton_schulz" => Orthogonalizer::NewtonSchulz {
                iters: self.optimizer.ns_iters,
            },
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown orthogonalizer '{other}' (expected exact_svd or newton_schulz)"
                )))
            }
        };

        Ok(OptimizerConfig {
            variant,
            eta0: self
                .optimizer
                .eta0
                .unwrap_or(0.05 / (m.min(n) as f64).sqrt()),
            beta0: self.optimizer.beta0.unwrap_or(1.0),
            horizon: self.optimizer.t,
            schedule,
            orthogonalizer,
            seed,
            record_spectra: self.optimizer.record_spectra,
            record_iterates: false,
        })
    }

    /// Instantiates the problem: the oracle plus the starting iterate. Both
    /// depend only on the problem seed, so every repeat sees the same
    /// instance.
    pub fn build_problem(&self) -> Result<(Box<dyn StochasticOracle>, Matrix), HarnessError> {
        let p = &self.problem;
        let mut rng = Rng::seed_from_u64(p.seed);
        match p.kind.as_str() {
            "noisy_quadratic" => {
                let oracle = NoisyQuadratic::new(p.m, p.n, p.num_samples, p.noise_scale, &mut rng);
                let w0 = displaced(oracle.target_mean(), p.start_distance, &mut rng);
                Ok((Box::new(oracle), w0))
            }
            "quartic" => {
                let center = gaussian_matrix(p.m, p.n, &mut rng);
                let oracle = QuarticOracle::new(
                    p.m,
                    p.n,
                    center.clone(),
                    p.num_samples,
                    p.noise_scale,
                    &mut rng,
                );
                let w0 = displaced(&center, p.start_distance, &mut rng);
                Ok((Box::new(oracle), w0))
            }
            "lowrank_target" => {
                let rank = p.true_rank.expect("validated");
                let oracle =
                    LowRankTarget::new(p.m, p.n, rank, p.num_samples, p.noise_scale, &mut rng);
                let w0 = if p.in_subspace_start {
                    oracle.in_subspace_start(p.start_distance, &mut rng)
                } else {
                    let w_star = oracle.constants().w_star.clone().expect("quadratic");
                    displaced(&w_star, p.start_distance, &mut rng)
                };
                Ok((Box::new(oracle), w0))
            }
            other => Err(HarnessError::Config(format!(
                "unknown problem kind '{other}'"
            ))),
        }
    }
}

fn displaced(base: &Matrix, distance: f64, rng: &mut Rng) -> Matrix {
    let dir = gaussian_matrix(base.rows(), base.cols(), rng);
    base.add(&dir.scale(distance / dir.frobenius_norm()))
}

/// Applies one `path.to.key=value` override to a JSON tree. The value is
/// parsed as JSON when possible and falls back to a string.
fn apply_override(root: &mut serde_json::Value, item: &str) -> Result<(), HarnessError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override '{item}' is not KEY=VALUE")))?;
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));

    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let map = node.as_object_mut().ok_or_else(|| {
            HarnessError::Config(format!("override path '{path}' does not address an object"))
        })?;
        if i + 1 == segments.len() {
            map.insert(segment.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(segment.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("paths have at least one segment")
}
