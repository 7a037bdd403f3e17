//! Seeded parameter sweeps.

pub mod acceptance;
pub mod config;
pub mod plot;
pub mod runner;
pub mod table;

pub use config::{Estimator, ExperimentConfig, ModelSpec, Mode};
pub use runner::{run, run_with_workers};
pub use table::{ResultTable, Row, RowKind, SweepPoint};
