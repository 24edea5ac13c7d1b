//! Config parsing and sweep driver behind the `cogmac` binary.

pub mod config;
pub mod sweep;

pub use config::{parse_config, parse_config_with, ConfigError, LambdaGrid, ParseOptions, Parsed, RunConfig};
pub use sweep::{run_sweep, write_csv, SweepRow, SweepTable};
