//! Command-line pipeline: dataset generation, operator training, evaluation,
//! boundary export, oracle pricing and verification suites.

use std::fmt;

pub mod commands;
pub mod config;
pub mod verify;

pub use config::RunConfig;

/// Bad flags, config or input files (exit code 2).
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A verification check that did not hold (exit code 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AssertionFailure(pub String);

impl fmt::Display for AssertionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "assertion failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailure {}

/// 0 success, 1 assertion failure, 2 usage or config error, 3 numerical failure.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<AssertionFailure>() {
            return 1;
        }
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<dnop_core::Error>() {
            return if e.is_numerical() { 3 } else { 2 };
        }
    }
    2
}
