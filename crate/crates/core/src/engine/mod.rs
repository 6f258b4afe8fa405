//! Lumped-parameter model of an open gas-generator cycle engine.
//!
//! Two turbopumps (LOX, LH2) feed the main chamber through VCO/VCH and the gas
//! generator through VGO/VGH. The GG exhaust drives both turbines; VGC biases
//! how the hot gas is shared between them.

mod calibrate;
mod integrate;
mod model;
mod params;
mod steady;

use thiserror::Error;

use crate::baselines::OpenLoopSequence;

pub use calibrate::{
    calibrate, trim_end_positions, CalibrationOptions, CalibrationReport, CalibrationTarget, TargetReport,
    TargetValue, FREE_COEFFS,
};
pub use integrate::{integrate_with, step, substep_count};
pub use model::{derivatives, derived_outputs, EngineOutputs, EngineState, MassFlows};
pub use params::{
    end_positions, CstarModel, EngineParams, HotGasSplit, Ignition, IntegratorSettings, PumpCoeffs, Scenario,
    StarterProfile, Table1d, TurbineCoeffs, ValveCoeffs, ValveSet, END_POSITIONS_100, END_POSITIONS_80,
    VALVE_NAMES, VCH, VCO, VGC, VGH, VGO,
};
pub use steady::{steady_residual, steady_state_solve, steady_state_solve_from, steady_time, STEADY_TOLERANCE};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("non-physical plant state: {0}")]
    NonPhysical(String),
    #[error("step needs {substeps} internal sub-steps, cap is {cap}")]
    StepTooLarge { substeps: usize, cap: usize },
    #[error("steady-state solve did not converge (scaled residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("calibration failed, max scaled residual {:.3}\n{report}", report.max_scaled_residual())]
    CalibrationFailed { report: Box<CalibrationReport> },
    #[error("invalid engine parameters: {0}")]
    InvalidParams(String),
}

/// Time at which the controlled phase begins.
pub const HANDOFF_TIME: f64 = 1.5;

/// Replay the scripted start-up from rest up to the hand-off time.
pub fn init_state(
    params: &EngineParams,
    scenario: &Scenario,
    ols: &OpenLoopSequence,
) -> Result<EngineState, EngineError> {
    let start = EngineState::at_rest(params, ols.command_unchecked(0.0));
    integrate_with(&start, |t| ols.command_unchecked(t), params, scenario, HANDOFF_TIME)
}
