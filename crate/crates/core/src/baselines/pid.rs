use serde::{Deserialize, Serialize};

use crate::engine::{EngineOutputs, Scenario};
use crate::env::{Action, ACTION_HIGH, ACTION_LOW};

/// Ideal-form gains: `u = Kp (e + 1/Ti ∫e dt + Td de/dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ti: f64,
    pub td: f64,
}

impl PidGains {
    pub fn new(kp: f64, ti: f64, td: f64) -> Self {
        Self { kp, ti, td }
    }

    pub fn is_valid(&self) -> bool {
        self.kp.is_finite() && self.ti > 0.0 && self.td >= 0.0
    }
}

/// One controller loop: gains plus output parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidLoop {
    pub gains: PidGains,
    pub lo: f64,
    pub hi: f64,
    /// Feedforward added to the PID output (the valve's end position).
    pub bias: f64,
    pub anti_windup: bool,
}

/// Back-calculation tracking time constant as a fraction of Ti.
pub const TRACKING_RATIO: f64 = 0.1;
/// Derivative filter time constant as a fraction of Td.
pub const DERIVATIVE_FILTER_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    /// Integral contribution, already in output units.
    pub integrator: f64,
    pub prev_error: Option<f64>,
    pub filtered_derivative: f64,
    pub last_raw: f64,
    pub last_command: f64,
}

/// One controller update; returns the clamped command and the next state.
pub fn pid_step(cfg: &PidLoop, state: &PidState, setpoint: f64, measurement: f64, dt: f64) -> (f64, PidState) {
    let g = &cfg.gains;
    let e = setpoint - measurement;
    let de = match state.prev_error {
        Some(p) => (e - p) / dt,
        None => 0.0,
    };
    let tf = DERIVATIVE_FILTER_RATIO * g.td;
    let alpha = dt / (tf + dt);
    let d = state.filtered_derivative + alpha * (de - state.filtered_derivative);

    let raw = cfg.bias + g.kp * e + state.integrator + g.kp * g.td * d;
    let cmd = raw.clamp(cfg.lo, cfg.hi);
    let mut integrator = state.integrator + g.kp * dt / g.ti * e;
    if cfg.anti_windup {
        integrator += dt / (TRACKING_RATIO * g.ti) * (cmd - raw);
    }
    let next = PidState {
        integrator,
        prev_error: Some(e),
        filtered_derivative: d,
        last_raw: raw,
        last_command: cmd,
    };
    (cmd, next)
}

/// Gains for the three loops: VGO→MR_GG, VGH→p_cc (Pa), VGC→MR_PI.
/// Missing loops deserialize to the tuned set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidFamily {
    pub vgo: PidGains,
    pub vgh: PidGains,
    pub vgc: PidGains,
}

impl Default for PidFamily {
    fn default() -> Self {
        Self::tuned()
    }
}

impl PidFamily {
    /// Gain set reported for the reference engine.
    pub fn published() -> Self {
        Self {
            vgo: PidGains::new(98.5, 36.3, 3.56e-4),
            vgh: PidGains::new(2.59e-7, 1.22, 6.82e-3),
            vgc: PidGains::new(0.786, 1.06, 2.12e-2),
        }
    }

    /// GA-tuned gain set for this plant model (default GA config, seed 1).
    pub fn tuned() -> Self {
        Self {
            vgo: PidGains::new(0.163_086, 46.692_3, 7.033_86e-4),
            vgh: PidGains::new(1.014_11e-9, 7.280_37, 3.892_71e-2),
            vgc: PidGains::new(0.194_043, 39.966_0, 1.176_06e-2),
        }
    }

    pub fn zero() -> Self {
        let z = PidGains::new(0.0, 1.0, 0.0);
        Self { vgo: z, vgh: z, vgc: z }
    }

    pub fn as_array(&self) -> [PidGains; 3] {
        [self.vgo, self.vgh, self.vgc]
    }

    pub fn from_array(g: [PidGains; 3]) -> Self {
        Self { vgo: g[0], vgh: g[1], vgc: g[2] }
    }

    /// Nine genes in (Kp, Ti, Td) order per loop.
    pub fn to_genes(&self) -> [f64; 9] {
        let a = self.as_array();
        std::array::from_fn(|i| {
            let g = &a[i / 3];
            [g.kp, g.ti, g.td][i % 3]
        })
    }

    pub fn from_genes(x: &[f64; 9]) -> Self {
        Self::from_array(std::array::from_fn(|l| PidGains::new(x[3 * l], x[3 * l + 1], x[3 * l + 2])))
    }

    /// Loop configurations with feedforward `bias = [VGO, VGH, VGC]` end positions.
    pub fn loops(&self, bias: [f64; 3], anti_windup: bool) -> [PidLoop; 3] {
        let g = self.as_array();
        std::array::from_fn(|i| PidLoop {
            gains: g[i],
            lo: ACTION_LOW[i],
            hi: ACTION_HIGH[i],
            bias: bias[i],
            anti_windup,
        })
    }
}

/// Three independent loops acting on the plant outputs.
pub fn pid_family_step(
    loops: &[PidLoop; 3],
    states: &[PidState; 3],
    outputs: &EngineOutputs,
    scenario: &Scenario,
    dt: f64,
) -> (Action, [PidState; 3]) {
    let setpoints = [scenario.mr_gg_ref, scenario.p_cc_ref, scenario.mr_pi_ref];
    let measured = [outputs.mr_gg, outputs.p_cc, outputs.mr_pi];
    let mut cmd = [0.0; 3];
    let mut next = *states;
    for i in 0..3 {
        let (u, s) = pid_step(&loops[i], &states[i], setpoints[i], measured[i], dt);
        cmd[i] = u;
        next[i] = s;
    }
    (Action::new(cmd[0], cmd[1], cmd[2]), next)
}
