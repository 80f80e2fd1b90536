//! Configuration, presets, file formats and the run driver behind the
//! `spinfluid` command.

pub mod config;
pub mod io;
pub mod presets;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, Mode, RawConfig, ScenarioConfig};
pub use run::{run, RunOptions, RunOutcome, Status};
