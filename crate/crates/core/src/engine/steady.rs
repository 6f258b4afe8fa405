use super::integrate::step;
use super::model::{derivatives, EngineState};
use super::params::{EngineParams, Scenario};
use super::EngineError;

/// Scaled-residual tolerance for an accepted equilibrium.
pub const STEADY_TOLERANCE: f64 = 1e-8;

const VAR_SCALE: [f64; 4] = [1.0e3, 1.0e3, 1.0e7, 1.0e7];
const RES_SCALE: [f64; 4] = [1.0e2, 1.0e2, 1.0e7, 1.0e7];

/// Clock value used for equilibrium states: every scripted start-up event is over.
pub fn steady_time(params: &EngineParams) -> f64 {
    let ends = [
        params.starter_profile.t_off,
        params.ignition_cc.time + params.ignition_cc.ramp,
        params.ignition_gg.time + params.ignition_gg.ramp,
    ];
    ends.iter().cloned().fold(0.0, f64::max) + 1.0
}

fn state_of(z: &[f64; 4], pos: &[f64; 5], t: f64) -> EngineState {
    EngineState {
        t,
        omega_lox: z[0] * VAR_SCALE[0],
        omega_lh2: z[1] * VAR_SCALE[1],
        p_cc: z[2] * VAR_SCALE[2],
        p_gg: z[3] * VAR_SCALE[3],
        valve_pos: *pos,
    }
}

/// Scaled equilibrium residual `[dω_lox, dω_lh2, dp_cc, dp_gg]` of a state.
pub fn steady_residual(
    state: &EngineState,
    params: &EngineParams,
    scenario: &Scenario,
) -> Result<[f64; 4], EngineError> {
    let d = derivatives(state, &state.valve_pos, params, scenario)?;
    Ok([d[1] / RES_SCALE[0], d[2] / RES_SCALE[1], d[3] / RES_SCALE[2], d[4] / RES_SCALE[3]])
}

fn norm(r: &[f64; 4]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solve4(a: [[f64; 4]; 4], b: [f64; 4]) -> Option<[f64; 4]> {
    let mut m = a;
    let mut x = b;
    for c in 0..4 {
        let piv = (c..4).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        x.swap(c, piv);
        for r in (c + 1)..4 {
            let f = m[r][c] / m[c][c];
            for k in c..4 {
                m[r][k] -= f * m[c][k];
            }
            x[r] -= f * x[c];
        }
    }
    let mut out = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = ((r + 1)..4).map(|k| m[r][k] * out[k]).sum();
        out[r] = (x[r] - s) / m[r][r];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn newton(
    guess: &EngineState,
    pos: &[f64; 5],
    params: &EngineParams,
    scenario: &Scenario,
) -> Result<EngineState, EngineError> {
    let t = steady_time(params);
    let mut z = [
        guess.omega_lox / VAR_SCALE[0],
        guess.omega_lh2 / VAR_SCALE[1],
        guess.p_cc / VAR_SCALE[2],
        guess.p_gg / VAR_SCALE[3],
    ];
    let resid = |z: &[f64; 4]| steady_residual(&state_of(z, pos, t), params, scenario);
    let mut r = resid(&z)?;
    for _ in 0..60 {
        if norm(&r) < STEADY_TOLERANCE * 1e-2 {
            break;
        }
        let mut jac = [[0.0; 4]; 4];
        for j in 0..4 {
            let h = 1e-6 * z[j].abs().max(1e-2);
            let mut zp = z;
            let mut zm = z;
            zp[j] += h;
            zm[j] -= h;
            let rp = resid(&zp)?;
            let rm = resid(&zm)?;
            for i in 0..4 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let Some(dz) = solve4(jac, [-r[0], -r[1], -r[2], -r[3]]) else {
            break;
        };
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-4 {
            let mut zn = z;
            for i in 0..4 {
                zn[i] = (z[i] + lambda * dz[i]).max(1e-6);
            }
            if let Ok(rn) = resid(&zn) {
                if norm(&rn) < norm(&r) {
                    z = zn;
                    r = rn;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let res = norm(&r);
    if res < STEADY_TOLERANCE && z.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(state_of(&z, pos, t))
    } else {
        Err(EngineError::NoConvergence { residual: res })
    }
}

/// Rough operating-point guess scaled from the valve openings.
fn default_guess(params: &EngineParams, pos: &[f64; 5]) -> EngineState {
    let gg_open = ((pos[2] + pos[3]) / 1.2).clamp(0.3, 1.5);
    EngineState {
        t: steady_time(params),
        omega_lox: params.turbine_lox.omega_opt * gg_open.sqrt(),
        omega_lh2: params.turbine_lh2.omega_opt * gg_open.sqrt(),
        p_cc: 100.0e5 * gg_open,
        p_gg: 75.0e5 * gg_open,
        valve_pos: *pos,
    }
}

/// Equilibrium of the plant with valves held at `valve_positions`.
pub fn steady_state_solve(
    valve_positions: &[f64; 5],
    params: &EngineParams,
    scenario: &Scenario,
) -> Result<EngineState, EngineError> {
    steady_state_solve_from(&default_guess(params, valve_positions), valve_positions, params, scenario)
}

/// Equilibrium solve starting from a caller-supplied guess. Falls back to a
/// transient settle from the guess if Newton does not converge directly.
pub fn steady_state_solve_from(
    guess: &EngineState,
    valve_positions: &[f64; 5],
    params: &EngineParams,
    scenario: &Scenario,
) -> Result<EngineState, EngineError> {
    let first = match newton(guess, valve_positions, params, scenario) {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    let mut s = *guess;
    s.t = steady_time(params);
    s.valve_pos = *valve_positions;
    for _ in 0..8 {
        s = match step(&s, valve_positions, params, scenario, 0.5) {
            Ok(next) => next,
            Err(_) => return Err(first),
        };
        if let Ok(sol) = newton(&s, valve_positions, params, scenario) {
            return Ok(sol);
        }
    }
    Err(first)
}
