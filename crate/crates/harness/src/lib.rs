//! Dataset handling, test execution, the evaluation pipeline and sweeps.

pub mod dataset;
pub mod env;
pub mod exec;
pub mod pipeline;
pub mod report;
pub mod settings;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad input: flags, config, dataset contents.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 1,
            HarnessError::Runtime(_) => 2,
        }
    }
}

impl From<dataset::DatasetError> for HarnessError {
    fn from(e: dataset::DatasetError) -> Self {
        match e {
            dataset::DatasetError::Io { .. } => HarnessError::Runtime(e.to_string()),
            _ => HarnessError::Validation(e.to_string()),
        }
    }
}

/// Path of the bundled three-task demo dataset.
pub fn demo_dataset_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo.jsonl")
}
