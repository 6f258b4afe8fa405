use serde::{Deserialize, Serialize};

use super::params::{EngineParams, PumpCoeffs, Scenario, VCH, VCO, VGC, VGH, VGO};
use super::EngineError;

const GAS_CONSTANT: f64 = 8314.46;
const H2_MOLAR_MASS: f64 = 2.016;
const O2_MOLAR_MASS: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub t: f64,
    pub omega_lox: f64,
    pub omega_lh2: f64,
    pub p_cc: f64,
    pub p_gg: f64,
    /// Actual positions `[VCO, VCH, VGO, VGH, VGC]`.
    pub valve_pos: [f64; 5],
}

impl EngineState {
    pub const DIM: usize = 10;

    /// Plant at rest: shafts stopped, both chambers at ambient.
    pub fn at_rest(params: &EngineParams, valve_pos: [f64; 5]) -> Self {
        Self {
            t: 0.0,
            omega_lox: 0.0,
            omega_lh2: 0.0,
            p_cc: params.ambient_pressure,
            p_gg: params.ambient_pressure,
            valve_pos,
        }
    }

    pub fn to_array(&self) -> [f64; 10] {
        let v = &self.valve_pos;
        [self.t, self.omega_lox, self.omega_lh2, self.p_cc, self.p_gg, v[0], v[1], v[2], v[3], v[4]]
    }

    pub fn from_array(a: &[f64; 10]) -> Self {
        Self {
            t: a[0],
            omega_lox: a[1],
            omega_lh2: a[2],
            p_cc: a[3],
            p_gg: a[4],
            valve_pos: [a[5], a[6], a[7], a[8], a[9]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MassFlows {
    pub main_ox: f64,
    pub main_fu: f64,
    pub gg_ox: f64,
    pub gg_fu: f64,
    pub nozzle: f64,
    pub turbine: f64,
    pub starter: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineOutputs {
    pub p_cc: f64,
    pub p_gg: f64,
    pub mr_gg: f64,
    pub mr_pi: f64,
    pub mr_cc: f64,
    pub thrust: f64,
    pub t_gg: f64,
    pub flows: MassFlows,
    pub p_discharge_lox: f64,
    pub p_discharge_lh2: f64,
    pub power_turbine_lox: f64,
    pub power_turbine_lh2: f64,
    pub power_pump_lox: f64,
    pub power_pump_lh2: f64,
    pub rt_cc: f64,
    pub rt_gg: f64,
}

pub(crate) fn big_gamma(g: f64) -> f64 {
    g.sqrt() * (2.0 / (g + 1.0)).powf((g + 1.0) / (2.0 * (g - 1.0)))
}

/// Regularized incompressible orifice: sqrt law away from zero, linear near it.
#[inline]
pub(crate) fn orifice(area: f64, rho: f64, dp: f64, smoothing: f64) -> f64 {
    if dp <= 0.0 || area <= 0.0 {
        return 0.0;
    }
    area * (2.0 * rho).sqrt() * dp / (dp * dp + smoothing * smoothing).sqrt().sqrt()
}

#[inline]
fn orifice_slope(area: f64, rho: f64, dp: f64, smoothing: f64) -> f64 {
    if dp <= 0.0 || area <= 0.0 {
        return 0.0;
    }
    let s2 = dp * dp + smoothing * smoothing;
    area * (2.0 * rho).sqrt() * (0.5 * dp * dp + smoothing * smoothing) / (s2 * s2.sqrt().sqrt())
}

/// Total pump flow split between two downstream branches; returns (ṁ, p_discharge).
fn pump_operating_point(
    omega: f64,
    pump: &PumpCoeffs,
    p_tank: f64,
    rho: f64,
    branches: [(f64, f64); 2],
    smoothing: f64,
) -> (f64, f64) {
    let discharge = |m: f64| p_tank + pump.head(omega, m);
    let mismatch = |m: f64| {
        let p = discharge(m);
        m - branches.iter().map(|&(a, pd)| orifice(a, rho, p - pd, smoothing)).sum::<f64>()
    };
    if mismatch(0.0) >= 0.0 {
        return (0.0, discharge(0.0));
    }
    let slope = |m: f64| {
        let p = discharge(m);
        let dpd = pump.b * omega + 2.0 * pump.c * m;
        1.0 - branches.iter().map(|&(a, pd)| orifice_slope(a, rho, p - pd, smoothing)).sum::<f64>() * dpd
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while mismatch(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // Newton safeguarded by the bracket; the mismatch is monotone in ṁ.
    let mut m = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = mismatch(m);
        if f < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        let d = slope(m);
        let newton = m - f / d;
        let next = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let done = (next - m).abs() <= 1e-13 * m.max(1e-3) || hi - lo <= 1e-15 * hi.max(1.0);
        m = next;
        if done {
            break;
        }
    }
    (m, discharge(m))
}

struct GasProps {
    temp: f64,
    rt: f64,
    cstar: f64,
    cp: f64,
}

fn gg_gas(params: &EngineParams, mr: f64, ignition: f64) -> GasProps {
    let t_burnt = params.gg_temp_table.eval(mr);
    let temp = params.gg_injection_temp + ignition * (t_burnt - params.gg_injection_temp);
    let mrc = mr.min(7.9);
    let m_burnt = H2_MOLAR_MASS * (1.0 + mrc);
    let m_cold = (1.0 + mrc) / (1.0 / H2_MOLAR_MASS + mrc / O2_MOLAR_MASS);
    let molar = m_cold + ignition * (m_burnt - m_cold);
    let r = GAS_CONSTANT / molar;
    let g = params.gamma_gg;
    GasProps {
        temp,
        rt: r * temp,
        cstar: (r * temp).sqrt() / big_gamma(g),
        cp: g / (g - 1.0) * r,
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 1e-9 {
        num / den
    } else {
        0.0
    }
}

/// Algebraic closure of the plant at `state`: flows, mixture ratios, powers, thrust.
pub fn derived_outputs(
    state: &EngineState,
    params: &EngineParams,
    scenario: &Scenario,
) -> Result<EngineOutputs, EngineError> {
    if !state.is_finite() {
        return Err(EngineError::NonPhysical(format!("non-finite state at t = {}", state.t)));
    }
    let p = params;
    let s = &p.orifice_smoothing;
    let pos = &state.valve_pos;
    let v = &p.valve_flow_coeffs;
    let a_co = v.vco.effective_area(pos[VCO]);
    let a_ch = v.vch.effective_area(pos[VCH]);
    let a_go = v.vgo.effective_area(pos[VGO]);
    let a_gh = v.vgh.effective_area(pos[VGH]);
    let (p_cc, p_gg) = (state.p_cc, state.p_gg);

    let (m_lox, pd_lox) = pump_operating_point(
        state.omega_lox,
        &p.pump_coeffs_lox,
        p.tank_pressure_lox,
        p.density_lox,
        [(a_co, p_cc), (a_go, p_gg)],
        *s,
    );
    let (m_lh2, pd_lh2) = pump_operating_point(
        state.omega_lh2,
        &p.pump_coeffs_lh2,
        p.tank_pressure_lh2,
        p.density_lh2,
        [(a_ch, p_cc), (a_gh, p_gg)],
        *s,
    );

    for (name, area, dp) in [
        ("VCO", a_co, pd_lox - p_cc),
        ("VGO", a_go, pd_lox - p_gg),
        ("VCH", a_ch, pd_lh2 - p_cc),
        ("VGH", a_gh, pd_lh2 - p_gg),
    ] {
        if area > 0.0 && dp < -p.reverse_flow_tolerance {
            return Err(EngineError::NonPhysical(format!(
                "reverse pressure difference {:.3e} Pa across {name} at t = {}",
                dp, state.t
            )));
        }
    }

    let m_co = orifice(a_co, p.density_lox, pd_lox - p_cc, *s);
    let m_go = orifice(a_go, p.density_lox, pd_lox - p_gg, *s);
    let m_ch = orifice(a_ch, p.density_lh2, pd_lh2 - p_cc, *s);
    let m_gh = orifice(a_gh, p.density_lh2, pd_lh2 - p_gg, *s);
    let mr_cc = ratio(m_co, m_ch);
    let mr_gg = ratio(m_go, m_gh);
    let mr_pi = ratio(m_co + m_go, m_ch + m_gh);

    let ign_cc = p.ignition_cc.progress(state.t);
    let ign_gg = p.ignition_gg.progress(state.t);
    let cstar = p.cstar_table.blended(mr_cc, ign_cc);
    let m_noz = (p_cc - p.ambient_pressure).max(0.0) * p.throat_area_cc / cstar;
    let gas = gg_gas(p, mr_gg, ign_gg);
    let m_gt = (p_gg - p.ambient_pressure).max(0.0) * p.turbine_nozzle_area / gas.cstar;

    let g = p.gamma_gg;
    let pr = (p_gg / p.turbine_exhaust_pressure).max(1.0);
    let w_gg = gas.cp * gas.temp * (1.0 - pr.powf(-(g - 1.0) / g));
    let f = p.hot_gas_split.lox_fraction(pos[VGC]);
    let m_st = p.starter_profile.mass_flow_at(state.t);
    let gas_power = m_gt * w_gg + m_st * p.starter_profile.specific_work;
    let pt_lox = p.turbine_lox.efficiency_at(state.omega_lox, scenario.eta_lox) * f * gas_power;
    let pt_lh2 = p.turbine_lh2.efficiency_at(state.omega_lh2, scenario.eta_lh2) * (1.0 - f) * gas_power;
    let pp_lox = m_lox * (pd_lox - p.tank_pressure_lox) / (p.density_lox * p.pump_coeffs_lox.efficiency);
    let pp_lh2 = m_lh2 * (pd_lh2 - p.tank_pressure_lh2) / (p.density_lh2 * p.pump_coeffs_lh2.efficiency);
    let rt_cc = (big_gamma(p.gamma_cc) * cstar).powi(2);

    Ok(EngineOutputs {
        p_cc,
        p_gg,
        mr_gg,
        mr_pi,
        mr_cc,
        thrust: p.thrust_coeff * p.throat_area_cc * (p_cc - p.ambient_pressure).max(0.0),
        t_gg: gas.temp,
        flows: MassFlows {
            main_ox: m_co,
            main_fu: m_ch,
            gg_ox: m_go,
            gg_fu: m_gh,
            nozzle: m_noz,
            turbine: m_gt,
            starter: m_st,
        },
        p_discharge_lox: pd_lox,
        p_discharge_lh2: pd_lh2,
        power_turbine_lox: pt_lox,
        power_turbine_lh2: pt_lh2,
        power_pump_lox: pp_lox,
        power_pump_lh2: pp_lh2,
        rt_cc,
        rt_gg: gas.rt,
    })
}

/// Time derivative of the state vector `[t, ω_lox, ω_lh2, p_cc, p_gg, pos×5]`.
pub fn derivatives(
    state: &EngineState,
    cmd: &[f64; 5],
    params: &EngineParams,
    scenario: &Scenario,
) -> Result<[f64; 10], EngineError> {
    let o = derived_outputs(state, params, scenario)?;
    let p = params;
    let f = &o.flows;
    let mut d = [0.0; 10];
    d[0] = 1.0;
    d[1] = (o.power_turbine_lox - o.power_pump_lox) / (p.shaft_inertia_lox * state.omega_lox.max(p.omega_floor))
        - p.shaft_friction_lox / p.shaft_inertia_lox * state.omega_lox;
    d[2] = (o.power_turbine_lh2 - o.power_pump_lh2) / (p.shaft_inertia_lh2 * state.omega_lh2.max(p.omega_floor))
        - p.shaft_friction_lh2 / p.shaft_inertia_lh2 * state.omega_lh2;
    d[3] = o.rt_cc / p.volume_cc * (f.main_ox + f.main_fu - f.nozzle);
    d[4] = o.rt_gg / p.volume_gg * (f.gg_ox + f.gg_fu - f.turbine);
    for i in 0..5 {
        d[5 + i] = (cmd[i] - state.valve_pos[i]) / p.valve_time_constant;
    }
    Ok(d)
}
