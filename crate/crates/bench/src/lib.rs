//! Benchmark problems, run configuration and drivers behind the `dgflow` CLI.

pub mod config;
pub mod driver;
pub mod error;
pub mod output;
pub mod problems;

pub use config::{EnergyNormalization, ProblemKind, RunConfig, VariantKind};
pub use driver::{convergence, project_test, robustness, run, run_spec, RunOutput};
pub use error::{BenchError, Result};
pub use problems::ProblemSpec;
