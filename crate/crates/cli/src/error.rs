use std::path::PathBuf;

use ricci_lab_core::LabError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("check {check} failed: {source}")]
    Check { check: String, source: LabError },
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
}
