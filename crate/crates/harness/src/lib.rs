//! Monte Carlo driver for GFF level-set percolation experiments: TOML
//! configuration, deterministic parallel replica sweeps, JSONL estimate
//! records with resume, and CSV summaries.

pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod output;
pub mod record;
pub mod summarize;

pub use config::{parse_config, Experiment, ExperimentConfig, ModeSpec};
pub use error::{HarnessError, Result};
pub use record::{parse_record_line, EstimateRecord};
