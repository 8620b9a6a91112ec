use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cell ({algorithm}, seed {seed}) failed: {source}")]
    Cell {
        algorithm: String,
        seed: u64,
        #[source]
        source: vtr_core::Error,
    },
    #[error(transparent)]
    Core(#[from] vtr_core::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Config(_) => "config",
            LabError::Io { .. } => "io",
            LabError::Json { .. } => "json",
            LabError::Csv(_) => "csv",
            LabError::Cell { .. } => "cell",
            LabError::Core(_) => "domain",
        }
    }

    /// Single-line JSON description for scripts.
    pub fn to_json_line(&self) -> String {
        let mut obj = json!({ "error": self.kind(), "message": self.to_string() });
        if let LabError::Cell {
            algorithm, seed, ..
        } = self
        {
            obj["algorithm"] = json!(algorithm);
            obj["seed"] = json!(seed);
        }
        obj.to_string()
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
    let path = path.into();
    move |source| LabError::Io { path, source }
}
