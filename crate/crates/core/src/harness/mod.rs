//! Configuration, presets, the run loop, output files and bound verification.
//!
//! A run plays `T` rounds of reveal → update → ledger for every replicate
//! seed, then writes one directory per replicate:
//!
//! ```text
//! OUT/rep_0000/ledger_best-grid-dirac.csv
//! OUT/rep_0000/ledger_uniform.csv
//! OUT/rep_0000/snapshots.json
//! OUT/rep_0000/record.json
//! ```

mod config;
mod oracle;
mod presets;
mod run;
mod verify;

use thiserror::Error;

use crate::algorithms::AlgorithmError;
use crate::analysis::AnalysisError;
use crate::environments::EnvironmentError;
use crate::measures::MeasureError;

pub use config::{GridSpec, InitialSpec, ReferenceSpec, RunConfig, SCHEMA_VERSION};
pub use oracle::{oracle_suite, w2_by_permutation, OracleReport};
pub use presets::{preset, preset_names};
pub use run::{account, 
    load_records, run, run_replicate, simulate, write_replicate, BoundCheck, Ensemble, RunRecord,
    ShrinkingInputs, Snapshot, Trajectory,
};
pub use verify::{verify_bounds, Theorem, VerifyRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("{theorem} does not apply to a {variant} run")]
    TheoremMismatch { theorem: String, variant: String },
    #[error("no records to verify")]
    EmptyEnsemble,
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::UnknownPreset(_) => 2,
            _ => 1,
        }
    }
}
