//! Instance-file driver for `smoothrep`: subcommands, check suites, run
//! reports and the MPEC and two-stage demo problems.

pub mod commands;
pub mod instance;
pub mod report;
pub mod solve;
pub mod suites;

pub use commands::{run, Command};
pub use instance::Instance;
pub use report::Report;

/// Apply a `--seed` override.
pub fn with_seed(mut inst: Instance, seed: Option<u64>) -> Instance {
    if let Some(s) = seed {
        inst.seed = s;
    }
    inst
}
