use serde::{Deserialize, Serialize};

use super::EngineError;

/// Valve index into `EngineState::valve_pos` and command arrays.
pub const VCO: usize = 0;
pub const VCH: usize = 1;
pub const VGO: usize = 2;
pub const VGH: usize = 3;
pub const VGC: usize = 4;

pub const VALVE_NAMES: [&str; 5] = ["VCO", "VCH", "VGO", "VGH", "VGC"];

/// Linear valve in series with a fixed line/injector restriction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValveCoeffs {
    /// Effective flow area (Cd·A) at full opening, m².
    pub max_area: f64,
    /// Series restriction of the feed line and injector, m².
    pub line_area: f64,
}

impl ValveCoeffs {
    /// Effective flow area of valve and line in series.
    pub fn effective_area(&self, pos: f64) -> f64 {
        let a = self.max_area * pos;
        if a <= 0.0 {
            return 0.0;
        }
        1.0 / (1.0 / (a * a) + 1.0 / (self.line_area * self.line_area)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValveSet {
    pub vco: ValveCoeffs,
    pub vch: ValveCoeffs,
    pub vgo: ValveCoeffs,
    pub vgh: ValveCoeffs,
}

/// VGC sets the fraction of hot gas sent to the LOX turbine:
/// `f = base + gain * pos`, clamped to [0.02, 0.98].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotGasSplit {
    pub base: f64,
    pub gain: f64,
}

impl HotGasSplit {
    pub fn lox_fraction(&self, pos_vgc: f64) -> f64 {
        (self.base + self.gain * pos_vgc).clamp(0.02, 0.98)
    }
}

/// Pump head rise `dp = a ω² + b ω ṁ + c ṁ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub efficiency: f64,
}

impl PumpCoeffs {
    pub fn head(&self, omega: f64, mdot: f64) -> f64 {
        self.a * omega * omega + self.b * omega * mdot + self.c * mdot * mdot
    }
}

/// Turbine efficiency `eta * (2ν - ν²)` with `ν = ω / omega_opt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbineCoeffs {
    pub efficiency: f64,
    pub omega_opt: f64,
}

impl TurbineCoeffs {
    pub fn efficiency_at(&self, omega: f64, multiplier: f64) -> f64 {
        let nu = omega / self.omega_opt;
        self.efficiency * multiplier * (2.0 * nu - nu * nu).max(0.0)
    }
}

/// Main-chamber characteristic velocity, parabolic in mixture ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CstarModel {
    pub peak: f64,
    pub mr_at_peak: f64,
    pub curvature: f64,
    /// c* of unburnt propellant before ignition completes.
    pub cold: f64,
    pub mr_min: f64,
    pub mr_max: f64,
}

impl CstarModel {
    pub fn burnt(&self, mr: f64) -> f64 {
        let m = mr.clamp(self.mr_min, self.mr_max);
        self.peak - self.curvature * (m - self.mr_at_peak).powi(2)
    }

    pub fn blended(&self, mr: f64, ignition: f64) -> f64 {
        self.cold + ignition * (self.burnt(mr) - self.cold)
    }
}

/// Piecewise-linear table, clamped at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1d {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Table1d {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.y[0];
        }
        if x >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= x) - 1;
        let w = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.y[i] + w * (self.y[i + 1] - self.y[i])
    }

    pub fn is_monotone_increasing(&self) -> bool {
        self.x.windows(2).all(|w| w[1] > w[0]) && self.y.windows(2).all(|w| w[1] > w[0])
    }
}

/// Pyrotechnic starter: trapezoidal hot-gas flow over `[t_on, t_off]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarterProfile {
    pub t_on: f64,
    pub t_off: f64,
    pub ramp: f64,
    pub mass_flow: f64,
    /// Shaft work delivered per kg of starter gas, J/kg.
    pub specific_work: f64,
}

impl StarterProfile {
    pub fn mass_flow_at(&self, t: f64) -> f64 {
        if t <= self.t_on || t >= self.t_off {
            return 0.0;
        }
        let up = ((t - self.t_on) / self.ramp).min(1.0);
        let down = ((self.t_off - t) / self.ramp).min(1.0);
        self.mass_flow * up.min(down)
    }
}

/// Ignition of a combustor modelled as a linear combustion-efficiency ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ignition {
    pub time: f64,
    pub ramp: f64,
}

impl Ignition {
    pub fn progress(&self, t: f64) -> f64 {
        if t <= self.time {
            0.0
        } else if t >= self.time + self.ramp {
            1.0
        } else {
            (t - self.time) / self.ramp
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    /// Nominal internal RK4 step, s.
    pub internal_step: f64,
    /// Upper bound on sub-steps per `step` call.
    pub max_substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub throat_area_cc: f64,
    pub thrust_coeff: f64,
    pub volume_cc: f64,
    pub volume_gg: f64,
    pub shaft_inertia_lox: f64,
    pub shaft_inertia_lh2: f64,
    /// Bearing/seal loss `k ω²` in W.
    pub shaft_friction_lox: f64,
    pub shaft_friction_lh2: f64,
    pub pump_coeffs_lox: PumpCoeffs,
    pub pump_coeffs_lh2: PumpCoeffs,
    pub valve_flow_coeffs: ValveSet,
    pub hot_gas_split: HotGasSplit,
    pub turbine_lox: TurbineCoeffs,
    pub turbine_lh2: TurbineCoeffs,
    pub turbine_nozzle_area: f64,
    pub turbine_exhaust_pressure: f64,
    pub cstar_table: CstarModel,
    pub gamma_cc: f64,
    pub gamma_gg: f64,
    /// GG temperature (K) against mixture ratio, fuel-rich branch.
    pub gg_temp_table: Table1d,
    pub gg_injection_temp: f64,
    pub density_lox: f64,
    pub density_lh2: f64,
    pub tank_pressure_lox: f64,
    pub tank_pressure_lh2: f64,
    pub tank_temp_lox: f64,
    pub tank_temp_lh2: f64,
    pub ambient_pressure: f64,
    pub valve_time_constant: f64,
    pub ignition_cc: Ignition,
    pub ignition_gg: Ignition,
    pub starter_profile: StarterProfile,
    /// Pressure scale of the regularized orifice law near zero flow, Pa.
    pub orifice_smoothing: f64,
    pub omega_floor: f64,
    /// Reverse pressure difference across an open liquid valve that is
    /// treated as integration blow-up, Pa.
    pub reverse_flow_tolerance: f64,
    pub integrator: IntegratorSettings,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            throat_area_cc: 0.060_310_127_253_365_35,
            thrust_coeff: 1.68,
            volume_cc: 0.2,
            volume_gg: 0.01,
            shaft_inertia_lox: 0.5,
            shaft_inertia_lh2: 0.25,
            shaft_friction_lox: 0.018_379_056_017_048_11,
            shaft_friction_lh2: 0.009_984_281_429_667_494,
            pump_coeffs_lox: PumpCoeffs {
                a: 8.020_408_163_265_307,
                b: 0.0,
                c: -54.314_772_920_227_284,
                efficiency: 0.7,
            },
            pump_coeffs_lh2: PumpCoeffs {
                a: 1.407_407_407_407_407_4,
                b: 0.0,
                c: -1_707.868_910_499_298_4,
                efficiency: 0.7,
            },
            valve_flow_coeffs: ValveSet {
                vco: ValveCoeffs {
                    max_area: 0.007_657_119_311_382_165,
                    line_area: 0.002_552_373_103_794_055_5,
                },
                vch: ValveCoeffs {
                    max_area: 0.004_373_955_227_808_598,
                    line_area: 0.001_457_985_075_936_199_4,
                },
                vgo: ValveCoeffs {
                    max_area: 5.143_666_864_182_216e-5,
                    line_area: 6.172_400_237_018_66e-5,
                },
                vgh: ValveCoeffs {
                    max_area: 1.987_566_117_078_453e-4,
                    line_area: 2.385_079_340_494_143_6e-4,
                },
            },
            hot_gas_split: HotGasSplit {
                base: 0.117_767_597_168_081_1,
                gain: 0.2,
            },
            turbine_lox: TurbineCoeffs {
                efficiency: 0.664_348_477_222_612_4,
                omega_opt: 1400.0,
            },
            turbine_lh2: TurbineCoeffs {
                efficiency: 0.664_348_477_222_612_4,
                omega_opt: 3600.0,
            },
            turbine_nozzle_area: 0.001_880_114_715_730_146_8,
            turbine_exhaust_pressure: 5.0e5,
            cstar_table: CstarModel {
                peak: 2430.0,
                mr_at_peak: 3.6,
                curvature: 22.0,
                cold: 1000.0,
                mr_min: 1.0,
                mr_max: 9.0,
            },
            gamma_cc: 1.2,
            gamma_gg: 1.38,
            gg_temp_table: Table1d {
                x: vec![0.0, 0.4, 0.6, 0.8, 0.9, 1.0, 1.2, 1.5],
                y: vec![50.0, 450.0, 620.0, 800.0, 890.0, 980.0, 1150.0, 1380.0],
            },
            gg_injection_temp: 50.0,
            density_lox: 1141.0,
            density_lh2: 70.8,
            tank_pressure_lox: 4.0e5,
            tank_pressure_lh2: 3.0e5,
            tank_temp_lox: 92.0,
            tank_temp_lh2: 22.0,
            ambient_pressure: 1.0e5,
            valve_time_constant: 0.05,
            ignition_cc: Ignition { time: 1.0, ramp: 0.05 },
            ignition_gg: Ignition { time: 1.5, ramp: 0.05 },
            starter_profile: StarterProfile {
                t_on: 1.1,
                t_off: 2.6,
                ramp: 0.05,
                mass_flow: 2.0,
                specific_work: 1.5e6,
            },
            orifice_smoothing: 2.0e4,
            omega_floor: 1.0,
            reverse_flow_tolerance: 30.0e5,
            integrator: IntegratorSettings {
                internal_step: 1.0e-3,
                max_substeps: 100_000,
            },
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<(), EngineError> {
        let v = &self.valve_flow_coeffs;
        let positive = [
            ("throat_area_cc", self.throat_area_cc),
            ("volume_cc", self.volume_cc),
            ("volume_gg", self.volume_gg),
            ("shaft_inertia_lox", self.shaft_inertia_lox),
            ("shaft_inertia_lh2", self.shaft_inertia_lh2),
            ("turbine_nozzle_area", self.turbine_nozzle_area),
            ("vco.max_area", v.vco.max_area),
            ("vco.line_area", v.vco.line_area),
            ("vch.max_area", v.vch.max_area),
            ("vch.line_area", v.vch.line_area),
            ("vgo.max_area", v.vgo.max_area),
            ("vgo.line_area", v.vgo.line_area),
            ("vgh.max_area", v.vgh.max_area),
            ("vgh.line_area", v.vgh.line_area),
            ("valve_time_constant", self.valve_time_constant),
            ("integrator.internal_step", self.integrator.internal_step),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(EngineError::InvalidParams(format!("{name} must be positive, got {x}")));
            }
        }
        let t = &self.gg_temp_table;
        if t.x.len() < 2 || t.x.len() != t.y.len() || !t.is_monotone_increasing() {
            return Err(EngineError::InvalidParams("gg_temp_table must be monotone increasing".into()));
        }
        let c = &self.cstar_table;
        if !(c.curvature > 0.0 && c.mr_at_peak > 3.0 && c.mr_at_peak < 8.0) {
            return Err(EngineError::InvalidParams(
                "cstar_table needs a single interior maximum in MR [3, 8]".into(),
            ));
        }
        let s = &self.starter_profile;
        if !(s.t_on < s.t_off && s.ramp > 0.0 && s.mass_flow >= 0.0) {
            return Err(EngineError::InvalidParams("starter_profile window is empty".into()));
        }
        Ok(())
    }
}

/// Operating point and turbine health for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub p_cc_ref: f64,
    pub mr_pi_ref: f64,
    pub mr_gg_ref: f64,
    pub eta_lox: f64,
    pub eta_lh2: f64,
}

impl Scenario {
    pub const EFFICIENCY_LEVELS: [f64; 4] = [1.00, 0.95, 0.90, 0.85];

    pub fn nominal(p_cc_bar: f64) -> Self {
        Self {
            p_cc_ref: p_cc_bar * 1e5,
            mr_pi_ref: 5.2,
            mr_gg_ref: 0.9,
            eta_lox: 1.0,
            eta_lh2: 1.0,
        }
    }

    pub fn with_efficiency(mut self, eta_lox: f64, eta_lh2: f64) -> Self {
        self.eta_lox = eta_lox;
        self.eta_lh2 = eta_lh2;
        self
    }

    pub fn is_valid(&self) -> bool {
        let ok = |e: f64| (0.85 - 1e-12..=1.0 + 1e-12).contains(&e);
        ok(self.eta_lox) && ok(self.eta_lh2) && self.p_cc_ref > 0.0
    }
}

/// Valve end positions `[VCO, VCH, VGO, VGH, VGC]` for the two operating points.
pub fn end_positions(p_cc_bar: f64) -> [f64; 5] {
    if (p_cc_bar - 80.0).abs() < 1e-9 {
        END_POSITIONS_80
    } else {
        END_POSITIONS_100
    }
}

pub const END_POSITIONS_100: [f64; 5] = [1.0, 1.0, 0.6, 0.6, 0.5];
pub const END_POSITIONS_80: [f64; 5] = [1.0, 1.0, 0.412_88, 0.425_36, 0.507_12];
