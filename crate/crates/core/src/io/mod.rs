//! File formats: design configs, stored batches, scenario grids and CSV output.

pub mod config;
pub mod export;
pub mod grid;
pub mod store;

pub use config::{parse_config, parse_config_str, ConfigError, Scenario, SpecSet};
pub use grid::{scenario_grid, scenario_label, GridScenario};
pub use store::{run_batch, Batch, RunManifest, StoreError};
