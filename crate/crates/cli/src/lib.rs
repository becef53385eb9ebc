//! Batch front end: configuration, the computation pipeline and its CSV/JSON artifacts.
pub mod config;
pub mod pipeline;

pub use config::{parse_ladder, ExperimentConfig};
pub use pipeline::{run, Check, Command, RunReport, Status};
