//! Experiment harness: data loading, configuration, single runs, the ablation
//! matrix and metrics summaries. The `purl` binary is a thin CLI over this crate.

pub mod ablation;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod idx;
pub mod records;
pub mod run;
pub mod stats;
pub mod summary;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
