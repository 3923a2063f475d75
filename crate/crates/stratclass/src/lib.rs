//! Scenario files, score-table ingestion, experiment drivers and the
//! command-line interface on top of `stratclass-core`.

use std::path::PathBuf;

pub mod cli;
pub mod experiment;
pub mod scenario;
pub mod table;

pub use experiment::{OracleCheck, PolicyRecord, ReplicationRecord, RocRecord, SummaryRecord, SurfaceRecord};
pub use scenario::{load, LoadedScenario, Scenario};
pub use table::{load_score_table, ScoreTable};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {0}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("scenario does not parse: {0}")]
    Parse(String),
    #[error("override `{0}`: {1}")]
    Override(String, String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("missing {0}")]
    Missing(String),
    #[error("score table row {row}: {reason}")]
    Table { row: usize, reason: String },
    #[error(transparent)]
    Model(#[from] stratclass_core::Error),
}
