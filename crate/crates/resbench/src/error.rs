use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario {origin}: {source}")]
    Parse {
        origin: String,
        source: serde_json::Error,
    },
    #[error(
        "unknown strategy {0:?}; expected one of rds, ards, anvp, mape_single, mape_fusion, fso"
    )]
    UnknownStrategy(String),
    #[error("invalid {field} in scenario {scenario}: {message}")]
    Config {
        scenario: String,
        field: &'static str,
        message: String,
    },
    #[error("scenario {scenario} failed: {source}")]
    Run {
        scenario: String,
        source: resbench_core::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
