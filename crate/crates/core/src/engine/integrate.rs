use super::model::{derivatives, EngineState};
use super::params::{EngineParams, Scenario};
use super::EngineError;

fn rk4_substep(
    state: &EngineState,
    cmd: &[f64; 5],
    params: &EngineParams,
    scenario: &Scenario,
    h: f64,
) -> Result<EngineState, EngineError> {
    let x = state.to_array();
    let offset = |k: &[f64; 10], c: f64| {
        let mut y = x;
        for i in 0..10 {
            y[i] += c * k[i];
        }
        EngineState::from_array(&y)
    };
    let k1 = derivatives(state, cmd, params, scenario)?;
    let k2 = derivatives(&offset(&k1, 0.5 * h), cmd, params, scenario)?;
    let k3 = derivatives(&offset(&k2, 0.5 * h), cmd, params, scenario)?;
    let k4 = derivatives(&offset(&k3, h), cmd, params, scenario)?;
    let mut y = x;
    for i in 0..10 {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let mut next = EngineState::from_array(&y);
    next.omega_lox = next.omega_lox.max(0.0);
    next.omega_lh2 = next.omega_lh2.max(0.0);
    next.p_cc = next.p_cc.max(params.ambient_pressure);
    next.p_gg = next.p_gg.max(params.ambient_pressure);
    if !next.is_finite() {
        return Err(EngineError::NonPhysical(format!("integration produced non-finite state near t = {}", state.t)));
    }
    Ok(next)
}

/// Number of internal sub-steps used for an interval of length `dt`.
pub fn substep_count(dt: f64, params: &EngineParams) -> usize {
    ((dt / params.integrator.internal_step) - 1e-9).ceil().max(1.0) as usize
}

/// Integrate over `dt` with the command re-sampled from `cmd_at(t)` at the start
/// of every internal sub-step.
pub fn integrate_with<F>(
    state: &EngineState,
    mut cmd_at: F,
    params: &EngineParams,
    scenario: &Scenario,
    dt: f64,
) -> Result<EngineState, EngineError>
where
    F: FnMut(f64) -> [f64; 5],
{
    if !(dt > 0.0) {
        return Ok(*state);
    }
    let n = substep_count(dt, params);
    if n > params.integrator.max_substeps {
        return Err(EngineError::StepTooLarge { substeps: n, cap: params.integrator.max_substeps });
    }
    let h = dt / n as f64;
    let t0 = state.t;
    let mut s = *state;
    for i in 0..n {
        let cmd = cmd_at(s.t);
        s = rk4_substep(&s, &cmd, params, scenario, h)?;
        // Re-derive the clock from the start time so it does not drift.
        s.t = t0 + (i + 1) as f64 * h;
    }
    s.t = t0 + dt;
    Ok(s)
}

/// Advance the plant by one control interval holding `valve_cmd` constant.
pub fn step(
    state: &EngineState,
    valve_cmd: &[f64; 5],
    params: &EngineParams,
    scenario: &Scenario,
    dt_control: f64,
) -> Result<EngineState, EngineError> {
    integrate_with(state, |_| *valve_cmd, params, scenario, dt_control)
}
