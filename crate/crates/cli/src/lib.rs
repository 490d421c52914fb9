//! Scenario runner for the `barrier-lab` command line tool.
//!
//! A scenario is a JSON config naming a system, CBF pairs, an optional CLF,
//! a controller and a task list. [`run::run`] executes the tasks and writes
//! JSON and CSV artifacts; [`compare::compare`] checks that equilibria,
//! reduced spectra and boundary fields do not depend on the CBF pair.

pub mod build;
pub mod builtin;
pub mod compare;
pub mod config;
pub mod error;
pub mod locate;
pub mod output;
pub mod run;

pub use build::{build, load, Scenario};
pub use config::{parse_config, ScenarioConfig};
pub use error::CliError;

/// Applies `BARRIER_LAB_THREADS` to the global worker pool.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(raw) = value else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("BARRIER_LAB_THREADS: expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("BARRIER_LAB_THREADS: {e}")))
}
