//! Comparison controllers: open-loop start-up sequence and the three-loop PID family.

mod ols;
mod pid;

use thiserror::Error;

pub use ols::{ols_command, OpenLoopSequence, ValveSchedule};
pub use pid::{
    pid_family_step, pid_step, PidFamily, PidGains, PidLoop, PidState, DERIVATIVE_FILTER_RATIO, TRACKING_RATIO,
};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("time {0} s is outside the sequence")]
    OutOfRange(f64),
}
