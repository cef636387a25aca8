//! Run files, verification suites and report output for the `reslab` binary.

pub mod config;
pub mod run;
pub mod suites;

pub use config::{parse_config, Command, RunConfig};
pub use run::{run, Outcome};
pub use suites::{Report, Session, Suite};
