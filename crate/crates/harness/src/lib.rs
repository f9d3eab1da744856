//! Scenario-driven verification experiments for the `hjsub` library: scenario
//! files, the runners for each experiment kind, and JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expr;
pub mod expression;
pub mod report;
pub mod runners;
pub mod scenario;

pub use error::{HarnessError, Result};
pub use report::{Check, Outcome, Report};
pub use runners::{run, RunOptions};
pub use scenario::Scenario;

/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 3;

/// Exit code for an error raised by the run itself.
pub fn exit_code(err: &HarnessError) -> i32 {
    if err.is_config() {
        EXIT_CONFIG
    } else {
        report::Outcome::Fail.exit_code()
    }
}
