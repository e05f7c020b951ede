//! Scenario runner, batch study and spiral sweep behind the `softrigid`
//! command.

pub mod batch;
pub mod error;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use error::{exit, CliError};
pub use scenario::{Overrides, Preset, RunConfig, Scenario};
