//! Library side of the `clozeprobe` command: configuration handling and
//! the pipeline stages, usable from tests without spawning the binary.

pub mod config;
pub mod pipeline;

use clozeprobe_core::ScoringError;

pub use config::{ConditionGrid, Overrides, RunConfig, ValidationError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_BACKEND_UNAVAILABLE: i32 = 3;

/// Exit status for a failed command, from the first recognised cause in
/// the error chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ValidationError>().is_some() {
            return EXIT_VALIDATION;
        }
        if let Some(ScoringError::BackendUnavailable(_)) = cause.downcast_ref::<ScoringError>() {
            return EXIT_BACKEND_UNAVAILABLE;
        }
    }
    EXIT_RUNTIME
}
