//! Command-line harness: netlist simulation, figure experiments and sweeps,
//! each writing CSV artifacts, a plot description and a checksummed manifest.

pub mod artifacts;
pub mod config;
pub mod run;
pub mod sweep;

use run::InputError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ASSERTION_FAILED: i32 = 1;
    pub const INPUT_MISSING: i32 = 2;
    pub const INPUT_INVALID: i32 = 3;
    pub const RUN_FAILED: i32 = 4;
}

/// Exit code for an error returned by a command.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<InputError>() {
        Some(InputError::Missing { .. }) => exit::INPUT_MISSING,
        Some(InputError::InvalidNetlist { .. }) => exit::INPUT_INVALID,
        None => {
            if e.chain().any(|c| c.is::<ConfigError>()) {
                exit::INPUT_INVALID
            } else {
                exit::RUN_FAILED
            }
        }
    }
}

/// Wraps config parsing failures so they map to [`exit::INPUT_INVALID`].
#[derive(Debug, thiserror::Error)]
#[error("{0:#}")]
pub struct ConfigError(pub anyhow::Error);
