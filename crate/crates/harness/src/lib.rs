//! Experiment runner for the klcma optimizers: seeded benchmark grids,
//! per-run records, medians, speedups against CMA-ES and ECDF data.

pub mod config;
pub mod error;
pub mod record;
pub mod report;
pub mod runner;

pub use config::{Algorithm, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use record::CellRecord;
