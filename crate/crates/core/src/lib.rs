//! Closed-loop start-up control of a gas-generator cycle rocket engine:
//! plant model, control environment, TD3 agent, PID/open-loop baselines,
//! GA gain tuning and the evaluation harness.

pub mod baselines;
pub mod engine;
pub mod env;
pub mod bench;
pub mod config;
pub mod neural;
pub mod par;
pub mod td3;
pub mod tuner;
