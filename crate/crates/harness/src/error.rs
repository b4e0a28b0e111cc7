use thiserror::Error;

/// Harness-level failures, each mapped to a documented exit code by the
/// CLI: config/usage errors exit 2, insufficient data exits 3, divergence
/// exits 4.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } => 2,
            HarnessError::InsufficientData(_) => 3,
        }
    }
}
